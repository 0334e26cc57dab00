"""Bott residues on S^2 x S^2 for a torus action with speeds (1, 2).

The first Pontryagin number vanishes, yet each pole carries c_2(L)/Pf(L) = 5/(+-2).
"""

from lieloc.checks import bott_run
from lieloc.specfile import load_builtin

spec = load_builtin("s2xs2-tangent")
for phi in ("x1", "1"):
    rep = bott_run(spec, phi=phi, xi=[1.0, 2.0])
    print(f"Phi={phi}: lhs {rep['lhs']:.10g}, rhs {rep['rhs']:.10g}")
    for t in rep["terms"]:
        print(f"  {t['label']}: chern {t['chern']}, sqrt det {t['sqrt_det']:+.3f}, contribution {t['contribution']:+.4f}")
