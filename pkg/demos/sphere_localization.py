"""Area of the round sphere from the two poles of a rotation."""

from lieloc.localization import verify_localization
from lieloc.specfile import load_builtin

spec = load_builtin("s2-tangent-rotation")
for lam in (0.5, 1.0, 3.0):
    rep = verify_localization(spec.action, spec.cocycle, [lam], spec.fresh_fixed_points())
    poles = ", ".join(f"{t['label']} {t['contribution']:+.6f}" for t in rep["terms"])
    print(f"lambda={lam}: integral {rep['lhs']:.10f}, pole sum {rep['rhs']:.10f} ({poles})")
