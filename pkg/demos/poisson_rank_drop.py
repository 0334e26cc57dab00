"""On the Poisson sphere the anchor dies at the poles, so they contribute nothing."""

from lieloc.localization import verify_localization
from lieloc.specfile import load_builtin

spec = load_builtin("s2-poisson")
rep = verify_localization(spec.action, spec.cocycle, spec.xi, spec.fresh_fixed_points())
print(f"lhs {rep['lhs']:.3e}, rhs {rep['rhs']:.3e}")
for t in rep["terms"]:
    print(f"  {t['label']}: numerator {t['numerator']}")
