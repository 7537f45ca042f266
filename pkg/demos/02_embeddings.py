"""Three ways to put Q-tuples into a linear space.

Run: python demos/02_embeddings.py
"""

import numpy as np

from qvalued import (
    QTuple,
    build_frame,
    decode,
    dist,
    whitney_eta,
    whitney_eta_inverse_1d,
    xi,
    xi0,
    xi_isometry_radius,
    zeta_dual_gap,
)

# --- Sorted projections onto one basis are 1-Lipschitz but not injective ---
v = QTuple([[-1, 1], [1, 0]])
w = QTuple([[-1, 0], [1, 1]])
print("xi0(v):", xi0(v, np.eye(2)))
print("xi0(w):", xi0(w, np.eye(2)), " same image, v != w:", v != w)

# --- Many bases repair injectivity; the frame certifies its separation ---
frame = build_frame(2, 2, seed=0)
print(f"frame: K={frame.K} bases, empirical epsilon={frame.epsilon:.3f}")
zv, zw = xi(v, frame), xi(w, frame)
print("now separated:", np.linalg.norm(zv.coords - zw.coords))

# The embedding never expands distances, preserves norms exactly, and is
# an exact isometry within the tuple's isometry radius.
g2 = dist(v, w)[0]
print("|xi(v)-xi(w)| <= G2:", np.linalg.norm(zv.coords - zw.coords) <= g2)
print("norm identity:", np.linalg.norm(xi(QTuple([[3, 4]]), build_frame(2, 1)).coords))
print("isometry radius of v:", xi_isometry_radius(v, frame))

# --- Decoding: invert the embedding by local optimization ---
decoded = decode(zv, frame)
print("decode round trip G2 error:", dist(v, decoded)[0])

# --- Polynomial coefficients: roots <-> coefficients in one variable ---
eta = whitney_eta(QTuple([1, 2]))
print("coefficients of (x-1)(x-2):", [eta[(1,)], eta[(2,)]])
print("roots recovered:", whitney_eta_inverse_1d([-3, 2]).points.ravel())

# The complex variant round-trips through companion-matrix eigenvalues.
roots = QTuple([[0.5, 0.5], [-1.0, 0.25], [0.0, -0.75]])
eta_c = whitney_eta(roots, complex_mul=True)
back = whitney_eta_inverse_1d([eta_c[(i,)] for i in (1, 2, 3)], as_complex=True)
print("complex round trip G2 error:", dist(roots, back)[0])

# --- Dual functionals: summation against Lipschitz test functions ---
rng = np.random.default_rng(1)
v = QTuple(rng.uniform(-1, 1, (3, 2)))
w = QTuple(rng.uniform(-1, 1, (3, 2)))
lower, upper = zeta_dual_gap(v, w, dictionary_size=128)
print(f"dual norm bracket: {lower:.4f} <= true <= {upper:.4f} (upper = G1)")
