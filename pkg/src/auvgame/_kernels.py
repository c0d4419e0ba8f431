"""Hot numeric kernels.

Everything here takes and returns plain float64 arrays so the same source
compiles under numba or runs as ordinary numpy. Argument checking lives in
the public wrappers, not here.
"""
import numpy as np

from ._backend import USE_NUMBA, jit

# --------------------------------------------------------------------------
# kinematics
# --------------------------------------------------------------------------


@jit
def j1(phi, theta, psi):
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(psi), np.sin(psi)
    out = np.empty((3, 3))
    out[0, 0] = cp * ct
    out[0, 1] = -sp * cf + cp * st * sf
    out[0, 2] = sp * sf + cp * st * cf
    out[1, 0] = sp * ct
    out[1, 1] = cp * cf + sp * st * sf
    out[1, 2] = -cp * sf + sp * st * cf
    out[2, 0] = -st
    out[2, 1] = ct * sf
    out[2, 2] = ct * cf
    return out


@jit
def j2(phi, theta):
    cf, sf = np.cos(phi), np.sin(phi)
    ct, tt = np.cos(theta), np.tan(theta)
    out = np.zeros((3, 3))
    out[0, 0] = 1.0
    out[0, 1] = sf * tt
    out[0, 2] = cf * tt
    out[1, 1] = cf
    out[1, 2] = -sf
    out[2, 1] = sf / ct
    out[2, 2] = cf / ct
    return out


@jit
def j2_inv(phi, theta):
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    out = np.zeros((3, 3))
    out[0, 0] = 1.0
    out[0, 2] = -st
    out[1, 1] = cf
    out[1, 2] = ct * sf
    out[2, 1] = -sf
    out[2, 2] = ct * cf
    return out


@jit
def j_full(eta):
    out = np.zeros((6, 6))
    out[:3, :3] = j1(eta[3], eta[4], eta[5])
    out[3:, 3:] = j2(eta[3], eta[4])
    return out


@jit
def j_inv_full(eta):
    out = np.zeros((6, 6))
    out[:3, :3] = j1(eta[3], eta[4], eta[5]).T
    out[3:, 3:] = j2_inv(eta[3], eta[4])
    return out


@jit
def j_dot_full(eta, eta_dot):
    phi, theta, psi = eta[3], eta[4], eta[5]
    a, b, c = eta_dot[3], eta_dot[4], eta_dot[5]
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(psi), np.sin(psi)
    out = np.zeros((6, 6))
    # d/dt of the Z-Y-X rotation, entry by entry
    out[0, 0] = -sp * ct * c - cp * st * b
    out[0, 1] = -cp * cf * c + sp * sf * a - sp * st * sf * c + cp * ct * sf * b + cp * st * cf * a
    out[0, 2] = cp * sf * c + sp * cf * a - sp * st * cf * c + cp * ct * cf * b - cp * st * sf * a
    out[1, 0] = cp * ct * c - sp * st * b
    out[1, 1] = -sp * cf * c - cp * sf * a + cp * st * sf * c + sp * ct * sf * b + sp * st * cf * a
    out[1, 2] = sp * sf * c - cp * cf * a + cp * st * cf * c + sp * ct * cf * b - sp * st * sf * a
    out[2, 0] = -ct * b
    out[2, 1] = -st * sf * b + ct * cf * a
    out[2, 2] = -st * cf * b - ct * sf * a
    # d/dt of the Euler-rate map
    tt = st / ct
    sec2 = 1.0 / (ct * ct)
    out[3, 4] = cf * tt * a + sf * sec2 * b
    out[3, 5] = -sf * tt * a + cf * sec2 * b
    out[4, 4] = -sf * a
    out[4, 5] = -cf * a
    out[5, 4] = cf / ct * a + sf * st * sec2 * b
    out[5, 5] = -sf / ct * a + cf * st * sec2 * b
    return out


# --------------------------------------------------------------------------
# body-frame dynamics
# --------------------------------------------------------------------------


@jit
def skew(v):
    out = np.zeros((3, 3))
    out[0, 1] = -v[2]
    out[0, 2] = v[1]
    out[1, 0] = v[2]
    out[1, 2] = -v[0]
    out[2, 0] = -v[1]
    out[2, 1] = v[0]
    return out


@jit
def coriolis(M, nu):
    a = M @ nu
    s1 = skew(a[:3])
    out = np.zeros((6, 6))
    out[:3, 3:] = -s1
    out[3:, :3] = -s1
    out[3:, 3:] = -skew(a[3:])
    return out


@jit
def damping(d_lin, d_quad, nu):
    out = d_lin.copy()
    for i in range(6):
        out[i, i] += d_quad[i] * abs(nu[i])
    return out


@jit
def restoring(weight, buoyancy, r_g, r_b, phi, theta):
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    wb = weight - buoyancy
    gx = r_g[0] * weight - r_b[0] * buoyancy
    gy = r_g[1] * weight - r_b[1] * buoyancy
    gz = r_g[2] * weight - r_b[2] * buoyancy
    out = np.empty(6)
    out[0] = wb * st
    out[1] = -wb * ct * sf
    out[2] = -wb * ct * cf
    out[3] = -gy * ct * cf + gz * ct * sf
    out[4] = gz * st + gx * ct * cf
    out[5] = -gx * ct * sf - gy * st
    return out


@jit
def body_accel(nu, eta, tau, M, d_lin, d_quad, weight, buoyancy, r_g, r_b):
    rhs = (
        tau
        - coriolis(M, nu) @ nu
        - damping(d_lin, d_quad, nu) @ nu
        - restoring(weight, buoyancy, r_g, r_b, eta[3], eta[4])
    )
    return np.linalg.solve(M, rhs)


# --------------------------------------------------------------------------
# earth-fixed / control-affine form
# --------------------------------------------------------------------------


@jit
def earth_fixed(zeta, M, d_lin, d_quad, weight, buoyancy, r_g, r_b):
    eta = zeta[:6]
    eta_dot = zeta[6:]
    j_inv = j_inv_full(eta)
    nu = j_inv @ eta_dot
    jd = j_dot_full(eta, eta_dot)
    m_bar = j_inv.T @ M @ j_inv
    c_bar = j_inv.T @ (coriolis(M, nu) - M @ j_inv @ jd) @ j_inv
    d_bar = j_inv.T @ damping(d_lin, d_quad, nu) @ j_inv
    g_bar = j_inv.T @ restoring(weight, buoyancy, r_g, r_b, eta[3], eta[4])
    return 0.5 * (m_bar + m_bar.T), c_bar, d_bar, g_bar


@jit
def auv_affine(zeta, M, M_inv, d_lin, d_quad, weight, buoyancy, r_g, r_b):
    eta_dot = zeta[6:]
    _, c_bar, d_bar, g_bar = earth_fixed(zeta, M, d_lin, d_quad, weight, buoyancy, r_g, r_b)
    J = j_full(zeta[:6])
    # inverse of J^-T M J^-1 without a general inverse
    mb_inv = J @ M_inv @ J.T
    mb_inv = 0.5 * (mb_inv + mb_inv.T)
    f = np.empty(12)
    f[:6] = eta_dot
    f[6:] = -mb_inv @ (c_bar @ eta_dot + d_bar @ eta_dot + g_bar)
    g = np.zeros((12, 6))
    g[6:, :] = mb_inv
    return f, g


@jit
def auv_affine_batch(Z, M, M_inv, d_lin, d_quad, weight, buoyancy, r_g, r_b):
    n_pts = Z.shape[0]
    F = np.empty((n_pts, 12))
    G = np.empty((n_pts, 12, 6))
    for j in range(n_pts):
        f, g = auv_affine(Z[j], M, M_inv, d_lin, d_quad, weight, buoyancy, r_g, r_b)
        F[j] = f
        G[j] = g
    return F, G


# --------------------------------------------------------------------------
# quadratic basis
# --------------------------------------------------------------------------


@jit
def quad_features(z):
    n = z.shape[0]
    out = np.empty(n * (n + 1) // 2)
    idx = 0
    for i in range(n):
        for j in range(i, n):
            out[idx] = z[i] * z[j]
            idx += 1
    return out


@jit
def quad_jacobian(z):
    n = z.shape[0]
    out = np.zeros((n * (n + 1) // 2, n))
    idx = 0
    for i in range(n):
        for j in range(i, n):
            out[idx, i] += z[j]
            out[idx, j] += z[i]
            idx += 1
    return out


@jit
def quad_jacobian_batch(Z):
    n_pts, n = Z.shape
    out = np.empty((n_pts, n * (n + 1) // 2, n))
    for k in range(n_pts):
        out[k] = quad_jacobian(Z[k])
    return out


# --------------------------------------------------------------------------
# batched Bellman terms
# --------------------------------------------------------------------------


def _bellman_terms_numpy(S, F, G, Z, Q, R, R_inv, gamma, Wc, Wa1, Wa2):
    grad1 = np.einsum("jmn,m->jn", S, Wa1)
    grad2 = np.einsum("jmn,m->jn", S, Wa2)
    u1 = -0.5 * np.einsum("kl,jnl,jn->jk", R_inv, G, grad1)
    u2 = np.einsum("jnk,jn->jk", G, grad2) / (2.0 * gamma * gamma)
    zdot = F + np.einsum("jnk,jk->jn", G, u1 + u2)
    omega = np.einsum("jmn,jn->jm", S, zdot)
    p = np.sqrt(1.0 + np.einsum("jm,jm->j", omega, omega))
    cost = (
        np.einsum("jn,nl,jl->j", Z, Q, Z)
        + np.einsum("jk,kl,jl->j", u1, R, u1)
        - gamma * gamma * np.einsum("jk,jk->j", u2, u2)
    )
    delta = cost + omega @ Wc
    return omega, p, delta, u1, u2, cost


@jit
def _bellman_terms_loop(S, F, G, Z, Q, R, R_inv, gamma, Wc, Wa1, Wa2):
    n_pts, m, n = S.shape
    k = G.shape[2]
    omega = np.empty((n_pts, m))
    p = np.empty(n_pts)
    delta = np.empty(n_pts)
    U1 = np.empty((n_pts, k))
    U2 = np.empty((n_pts, k))
    cost = np.empty(n_pts)
    inv2g2 = 1.0 / (2.0 * gamma * gamma)
    for j in range(n_pts):
        Sj = S[j]
        Gj = G[j]
        grad1 = Sj.T @ Wa1
        grad2 = Sj.T @ Wa2
        u1 = -0.5 * (R_inv @ (Gj.T @ grad1))
        u2 = inv2g2 * (Gj.T @ grad2)
        zdot = F[j] + Gj @ (u1 + u2)
        w = Sj @ zdot
        omega[j] = w
        p[j] = np.sqrt(1.0 + w @ w)
        zj = Z[j]
        r = zj @ (Q @ zj) + u1 @ (R @ u1) - gamma * gamma * (u2 @ u2)
        cost[j] = r
        delta[j] = r + w @ Wc
        U1[j] = u1
        U2[j] = u2
    return omega, p, delta, U1, U2, cost


bellman_terms = _bellman_terms_loop if USE_NUMBA else _bellman_terms_numpy
