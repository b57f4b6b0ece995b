"""Independent dense-matrix oracles.

Everything here works on flat coordinate vectors of length N*dim_v + dim_w
and is built from explicit loops over basis pairs, so it shares no code path
with the package beyond the structure tensor itself.
"""

import numpy as np


def structure_constants(alg, N):
    """C[c, i, j] = coefficient of basis vector c in [e_i, e_j]."""
    dv, dw = alg.dim_v, alg.dim_w
    D = N * dv + dw
    C = np.zeros((D, D, D))
    for k in range(N):
        for p in range(dv):
            for q in range(dv):
                for a in range(dw):
                    C[N * dv + a, k * dv + p, k * dv + q] = alg.beta[a, p, q]
    return C


def dense_bracket(C, x, y):
    return np.einsum("cij,i,j->c", C, x, y)


def ad_matrix(C, x):
    """Matrix of u -> [x, u]."""
    return np.einsum("cij,i->cj", C, x)


def metric_matrix(spec, N, dim_v):
    a = spec.weights(N)
    G = np.zeros((N * dim_v + spec.w_matrix.shape[0],) * 2)
    G[:N * dim_v, :N * dim_v] = np.diag(np.repeat(a, dim_v))
    G[N * dim_v:, N * dim_v:] = spec.w_matrix
    return G


def dense_b_adjoint(C, G, y, x):
    """G^{-1} ad_x^T G y: the representer of u -> <[x, u], y>_G."""
    return np.linalg.solve(G, ad_matrix(C, x).T @ G @ y)


def brute_force_j(alg, z):
    """J_z from <J_z e_p, e_q> = <z, [e_p, e_q]> one basis pair at a time."""
    dv = alg.dim_v
    J = np.zeros((dv, dv))
    for p in range(dv):
        for q in range(dv):
            J[q, p] = sum(z[a] * alg.beta[a, p, q] for a in range(alg.dim_w))
    return J


def levi_civita(C, G, X, Y):
    """nabla_X Y = (1/2)([X, Y] - ad_X^* Y - ad_Y^* X) for left-invariant fields."""
    Gi = np.linalg.inv(G)

    def adj(u, v):
        return Gi @ ad_matrix(C, u).T @ G @ v

    return 0.5 * (dense_bracket(C, X, Y) - adj(X, Y) - adj(Y, X))


def orthonormalize(G, u, v):
    e1 = u / np.sqrt(u @ G @ u)
    f = v - (e1 @ G @ v) * e1
    f = f - (e1 @ G @ f) * e1
    return e1, f / np.sqrt(f @ G @ f)


def sectional_curvature(C, G, u, v):
    """<R(X, Y)Y, X> for the G-orthonormalized pair, R = [nabla_X, nabla_Y] - nabla_[X,Y]."""
    X, Y = orthonormalize(G, u, v)
    nY_Y = levi_civita(C, G, Y, Y)
    nX_Y = levi_civita(C, G, X, Y)
    R = levi_civita(C, G, X, nY_Y) - levi_civita(C, G, Y, nX_Y) \
        - levi_civita(C, G, dense_bracket(C, X, Y), Y)
    return float(R @ G @ X)
