"""NumPy implementations of the per-iteration hot kernels.

These are the reference implementations; the compiled extension in
``_kernels.pyx`` computes the same quantities loop-fused. Signatures and
results must match bit-for-bit up to floating point reassociation.
"""

import numpy as np

COMPILED = False


def rt0_vertex_values(coeffs, tri_edges, psi):
    """Flux values at the three vertices of each triangle, shape (T, 3, 2).

    ``psi[t, l, j]`` is the signed basis vector of local edge ``l`` at local
    vertex ``j``.
    """
    c = coeffs[tri_edges]  # (T, 3)
    return np.einsum("tl,tljk->tjk", c, psi)


def qb_local_system(coeffs, tri_edges, psi, areas, dvec, mcell, g, tau, delta, r):
    """Local 3x3 systems and right-hand sides of the linearized flux step.

    Returns ``(local_mat, local_rhs)``: the weighted vertex-quadrature Gram
    blocks plus the scaled divergence blocks, and the pairing of the smoothed
    minus raw power-law flux term plus the source/divergence term.
    """
    vals = rt0_vertex_values(coeffs, tri_edges, psi)  # (T, 3, 2)
    q2 = (vals * vals).sum(axis=2)  # (T, 3)
    half_rm2 = 0.5 * (r - 2.0)
    wdelta = (q2 + delta * delta) ** half_rm2
    weights = mcell[:, None] * wdelta  # (T, 3)

    # |v|^(r-2) v has magnitude |v|^(r-1); evaluate via logs to avoid overflow
    # for tiny |v|, and define it as 0 at v = 0.
    qnorm = np.sqrt(q2)
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = np.exp((r - 1.0) * np.log(qnorm))
        unit = vals / qnorm[:, :, None]
        raw = np.where(q2[:, :, None] > 0.0, mag[:, :, None] * unit, 0.0)
    smooth = wdelta[:, :, None] * vals
    cvec = mcell[:, None, None] * (smooth - raw)  # (T, 3, 2)

    third = areas / 3.0
    local_mat = np.einsum("t,tj,tljk,tmjk->tlm", third, weights, psi, psi)
    local_mat += np.einsum("t,tl,tm->tlm", tau / areas, dvec, dvec)
    local_rhs = np.einsum("t,tjk,tljk->tl", third, cvec, psi)
    local_rhs += g[:, None] * dvec
    return local_mat, local_rhs


def alg2_cell_update(w, triangles, grad_geom, q_prev, mh, rho):
    """Fused elementwise step of the splitting iteration.

    Computes the piecewise gradient of ``w``, the unconstrained minimizer
    ``(rho grad w - q_prev) / rho``, its projection onto the ball of radius
    ``mh``, and the multiplier update. Returns ``(grad, phi, q_new)``.
    """
    grad = np.einsum("tjk,tj->tk", grad_geom, w[triangles])
    phi_hat = grad - q_prev / rho
    nrm = np.linalg.norm(phi_hat, axis=1)
    scale = np.where(nrm > mh, mh / np.where(nrm > 0.0, nrm, 1.0), 1.0)
    phi = phi_hat * scale[:, None]
    q_new = q_prev - rho * (grad - phi)
    return grad, phi, q_new
