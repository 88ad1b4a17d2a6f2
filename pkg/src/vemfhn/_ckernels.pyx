# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def element_matrices(const double[:, ::1] vertices, const long long[::1] cell_ptr,
                     const long long[::1] cell_vertices, const double[:, ::1] centroids,
                     const double[::1] diameters):
    cdef Py_ssize_t n_cells = cell_ptr.shape[0] - 1
    cdef Py_ssize_t k, i, j, al, be, n, s, vi, nmax = 0
    cdef long long[::1] mat_ptr_v
    mat_ptr = np.zeros(n_cells + 1, dtype=np.int64)
    mat_ptr_v = mat_ptr
    for k in range(n_cells):
        n = cell_ptr[k + 1] - cell_ptr[k]
        mat_ptr_v[k + 1] = mat_ptr_v[k] + n * n
        if n > nmax:
            nmax = n
    proj_arr = np.empty((cell_ptr[n_cells], 3))
    stiff_arr = np.empty(mat_ptr_v[n_cells])
    mass_arr = np.empty(mat_ptr_v[n_cells])
    cdef double[:, ::1] proj = proj_arr
    cdef double[::1] stiff = stiff_arr
    cdef double[::1] mass = mass_arr
    cdef double[:, ::1] xi = np.empty((nmax, 2))
    cdef double[:, ::1] B = np.empty((3, nmax))
    cdef double[:, ::1] P = np.empty((3, nmax))
    cdef double[:, ::1] R = np.empty((nmax, nmax))
    cdef double G[3][3]
    cdef double Gi[3][3]
    cdef double H[3][3]
    cdef double det, h, cx, cy, area, mx, my, mxx, myy, mxy, cr
    cdef double px, py, qx, qy, acc_k, acc_m, sab
    cdef Py_ssize_t ip, inx
    for k in range(n_cells):
        s = cell_ptr[k]
        n = cell_ptr[k + 1] - s
        h = diameters[k]
        cx = centroids[k, 0]
        cy = centroids[k, 1]
        for i in range(n):
            vi = cell_vertices[s + i]
            xi[i, 0] = (vertices[vi, 0] - cx) / h
            xi[i, 1] = (vertices[vi, 1] - cy) / h
        # B = boundary data, D = [1, xi]
        for i in range(n):
            ip = (i + n - 1) % n
            inx = (i + 1) % n
            B[0, i] = 1.0 / n
            B[1, i] = 0.5 * (xi[inx, 1] - xi[ip, 1])
            B[2, i] = 0.5 * (xi[ip, 0] - xi[inx, 0])
        for al in range(3):
            G[al][0] = 0.0
            G[al][1] = 0.0
            G[al][2] = 0.0
            for i in range(n):
                G[al][0] += B[al, i]
                G[al][1] += B[al, i] * xi[i, 0]
                G[al][2] += B[al, i] * xi[i, 1]
        det = (G[0][0] * (G[1][1] * G[2][2] - G[1][2] * G[2][1])
               - G[0][1] * (G[1][0] * G[2][2] - G[1][2] * G[2][0])
               + G[0][2] * (G[1][0] * G[2][1] - G[1][1] * G[2][0]))
        if fabs(det) < 1e-300:
            raise ZeroDivisionError("singular projector Gram matrix in cell %d" % k)
        Gi[0][0] = (G[1][1] * G[2][2] - G[1][2] * G[2][1]) / det
        Gi[0][1] = (G[0][2] * G[2][1] - G[0][1] * G[2][2]) / det
        Gi[0][2] = (G[0][1] * G[1][2] - G[0][2] * G[1][1]) / det
        Gi[1][0] = (G[1][2] * G[2][0] - G[1][0] * G[2][2]) / det
        Gi[1][1] = (G[0][0] * G[2][2] - G[0][2] * G[2][0]) / det
        Gi[1][2] = (G[0][2] * G[1][0] - G[0][0] * G[1][2]) / det
        Gi[2][0] = (G[1][0] * G[2][1] - G[1][1] * G[2][0]) / det
        Gi[2][1] = (G[0][1] * G[2][0] - G[0][0] * G[2][1]) / det
        Gi[2][2] = (G[0][0] * G[1][1] - G[0][1] * G[1][0]) / det
        for al in range(3):
            for i in range(n):
                P[al, i] = Gi[al][0] * B[0, i] + Gi[al][1] * B[1, i] + Gi[al][2] * B[2, i]
                proj[s + i, al] = P[al, i]
        # remainder R = I - D P
        for i in range(n):
            for j in range(n):
                R[i, j] = -(P[0, j] + xi[i, 0] * P[1, j] + xi[i, 1] * P[2, j])
            R[i, i] += 1.0
        # scaled-monomial Gram matrix from vertex moment formulas
        area = 0.0
        mx = 0.0
        my = 0.0
        mxx = 0.0
        myy = 0.0
        mxy = 0.0
        for i in range(n):
            inx = (i + 1) % n
            px = xi[i, 0]
            py = xi[i, 1]
            qx = xi[inx, 0]
            qy = xi[inx, 1]
            cr = px * qy - qx * py
            area += cr
            mx += cr * (px + qx)
            my += cr * (py + qy)
            mxx += cr * (px * px + px * qx + qx * qx)
            myy += cr * (py * py + py * qy + qy * qy)
            mxy += cr * (px * qy + 2.0 * px * py + 2.0 * qx * qy + qx * py)
        H[0][0] = 0.5 * area * h * h
        H[0][1] = mx / 6.0 * h * h
        H[0][2] = my / 6.0 * h * h
        H[1][0] = H[0][1]
        H[2][0] = H[0][2]
        H[1][1] = mxx / 12.0 * h * h
        H[2][2] = myy / 12.0 * h * h
        H[1][2] = mxy / 24.0 * h * h
        H[2][1] = H[1][2]
        for i in range(n):
            for j in range(n):
                # G with its first row zeroed is the gradient Gram part
                acc_k = 0.0
                acc_m = 0.0
                for al in range(3):
                    for be in range(3):
                        if al > 0:
                            acc_k += P[al, i] * G[al][be] * P[be, j]
                        acc_m += P[al, i] * H[al][be] * P[be, j]
                sab = 0.0
                for vi in range(n):
                    sab += R[vi, i] * R[vi, j]
                stiff[mat_ptr_v[k] + i * n + j] = acc_k + sab
                mass[mat_ptr_v[k] + i * n + j] = acc_m + h * h * sab
    return proj_arr, stiff_arr, mass_arr, mat_ptr


def reaction_forms(const long long[::1] cell_ptr, const long long[::1] cell_vertices,
                   const double[:, ::1] proj, const long long[::1] quad_ptr,
                   const double[:, ::1] quad_mono, const double[::1] quad_w,
                   const double[::1] v, const double[::1] w,
                   double lam, double theta, double a, double b, Py_ssize_t n_dofs):
    cdef Py_ssize_t n_cells = cell_ptr.shape[0] - 1
    cdef Py_ssize_t k, p, q, dof
    cdef double cv0, cv1, cv2, cw0, cw1, cw2, vq, wq, ion, gat, wt
    cdef double mi0, mi1, mi2, mg0, mg1, mg2
    bion_arr = np.zeros(n_dofs)
    bgat_arr = np.zeros(n_dofs)
    cdef double[::1] bion = bion_arr
    cdef double[::1] bgat = bgat_arr
    for k in range(n_cells):
        cv0 = cv1 = cv2 = 0.0
        cw0 = cw1 = cw2 = 0.0
        for p in range(cell_ptr[k], cell_ptr[k + 1]):
            dof = cell_vertices[p]
            cv0 += proj[p, 0] * v[dof]
            cv1 += proj[p, 1] * v[dof]
            cv2 += proj[p, 2] * v[dof]
            cw0 += proj[p, 0] * w[dof]
            cw1 += proj[p, 1] * w[dof]
            cw2 += proj[p, 2] * w[dof]
        mi0 = mi1 = mi2 = 0.0
        mg0 = mg1 = mg2 = 0.0
        for q in range(quad_ptr[k], quad_ptr[k + 1]):
            vq = quad_mono[q, 0] * cv0 + quad_mono[q, 1] * cv1 + quad_mono[q, 2] * cv2
            wq = quad_mono[q, 0] * cw0 + quad_mono[q, 1] * cw1 + quad_mono[q, 2] * cw2
            ion = -lam * (wq - vq * (1.0 - vq) * (vq - theta)) * quad_w[q]
            gat = (a * vq - b * wq) * quad_w[q]
            mi0 += quad_mono[q, 0] * ion
            mi1 += quad_mono[q, 1] * ion
            mi2 += quad_mono[q, 2] * ion
            mg0 += quad_mono[q, 0] * gat
            mg1 += quad_mono[q, 1] * gat
            mg2 += quad_mono[q, 2] * gat
        for p in range(cell_ptr[k], cell_ptr[k + 1]):
            dof = cell_vertices[p]
            bion[dof] += proj[p, 0] * mi0 + proj[p, 1] * mi1 + proj[p, 2] * mi2
            bgat[dof] += proj[p, 0] * mg0 + proj[p, 1] * mg1 + proj[p, 2] * mg2
    return bion_arr, bgat_arr
