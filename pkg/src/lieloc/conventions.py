"""The frozen sign and normalisation conventions, in one table.

Every machine-readable report carries the hash of this table so that numbers
produced under different conventions cannot be mixed up silently.
"""

from __future__ import annotations

import hashlib
import json

CONVENTIONS = (
    ("wedge", "e^a ^ e^b evaluates to 1 on (e_a, e_b); coefficients live on sorted index tuples"),
    ("delta", "Cartan formula: anchor terms (-1)^i a(e_i) f, bracket terms (-1)^(i+j) f({e_i, e_j}, ...)"),
    ("twisted", "delta~ psi = delta psi + (-1)^k psi ^ theta, theta_a = sum_b c^b_ab + div a(e_a)"),
    ("contraction", "psi -| X pairs psi with the leading slots of X; (Y_1 ^ .. ^ Y_q) -| mu = i_Y1 .. i_Yq mu"),
    ("p", "p(psi (x) X (x) mu) = (a(psi -| X)) -| mu, so p delta~ = (-1)^k d p"),
    ("equivariant", "delta_g = delta - i_b(xi); p intertwines delta~_g with (-1)^k (d + i_xi*)"),
    ("pullback", "anchor pullback intertwines delta_g with d - i_xi*"),
    ("linearization", "L v = [xi*, v], i.e. L^i_j = -d_j (xi*)^i"),
    ("sqrt_det", "chart orientation times Pf(C^T L C^-T) with metric g = C C^T"),
    ("localization", "int p(gamma(xi)) = (-2 pi)^(m/2) sum p(gamma(xi))_0(x) / det^(1/2) L_x"),
    ("connection", "nabla_a s = a(e_a) s + omega_a s; R = delta omega + omega ^ omega"),
    ("moment", "mu(xi) = Theta_xi - omega(b(xi)), lift L_xi s = xi*(s) + Theta_xi s; D mu = i_b R"),
    ("sigma", "sigma_i = coefficient of t^(n-i) in det(t + X); Chern-Weil via wedge powers, no 2^l factor"),
    ("chern", "c_i(L) = i-th elementary symmetric function of the eigenvalues of L"),
    ("bott", "Phi_Xi = (-2 pi)^(-m/2) int p(Phi(sigma_2, sigma_4, ..) . Xi); x_i stands for sigma_2i"),
)


def conventions_hash() -> str:
    blob = json.dumps(CONVENTIONS, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def conventions_markdown() -> str:
    lines = ["| item | convention |", "| --- | --- |"]
    lines += [f"| {k} | {v.replace('|', '/')} |" for k, v in CONVENTIONS]
    return "\n".join(lines)
