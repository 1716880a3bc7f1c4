# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled evaluation kernels for the planning NLP.

Exact mirror of ``pure.PureEvaluator`` (same block ordering, same gating
conventions); see that module for the layout contract.
"""

import numpy as np

cimport numpy as cnp

from libc.math cimport fabs

from .layout import layout_spans, total_size

cnp.import_array()


cdef class CoreEvaluator:
    cdef public bint is_compiled
    cdef int N, m, nR, nD, n_hour, n_eq, n_in, n_total
    cdef bint relaxed
    cdef double theta1, theta2, theta3, theta4, theta5, tau_h, penalty_w
    cdef double c_temp, c_v2, c_v1, c_0
    cdef double a0_region, b_region, d3, gamma_lo, gamma_hi, vsum_hi
    cdef double[:, ::1] a0, occ, comf_gate_lo, comf_gate_hi, kap_gate, x1_gate
    cdef double[::1] a1_room, b_room, d1_room, d2_room
    cdef double[::1] outside, load, x_init, dx_init
    cdef double[::1] beta_lo, beta_hi, kap_lo, kap_hi, kap_mask, vsum_lo, hour_c
    cdef int[::1] zone_of_room, device_rooms, hour_a, hour_b
    cdef int o_u, o_v, o_r, o_tm, o_tc, o_w, o_va, o_x, o_dx, o_p, o_el, o_eh
    cdef int e_dx, e_ddx, e_pmv, e_mix, e_hour
    cdef int i_clo, i_chi, i_klo, i_khi, i_x1lo, i_x1hi, i_tc, i_uc, i_alo, i_ahi

    def __init__(self, data):
        self.is_compiled = True
        self.N = data.n_steps
        self.m = data.n_zones
        self.nR = data.n_rooms
        self.nD = data.n_device
        self.relaxed = data.relaxed
        self.theta1 = data.theta1
        self.theta2 = data.theta2
        self.theta3 = data.theta3
        self.theta4 = data.theta4
        self.theta5 = data.theta5
        self.tau_h = data.tau_h
        self.penalty_w = data.penalty_w
        self.c_temp = data.c_temp
        self.c_v2 = data.c_v2
        self.c_v1 = data.c_v1
        self.c_0 = data.c_0
        self.a0_region = data.a0_region
        self.b_region = data.b_region
        self.d3 = data.d3
        self.gamma_lo = data.gamma_lo
        self.gamma_hi = data.gamma_hi
        self.vsum_hi = data.vsum_hi

        def arr(a):
            return np.ascontiguousarray(a, dtype=np.float64)

        def iarr(a):
            return np.ascontiguousarray(a, dtype=np.int32)

        self.a0 = arr(data.a0)
        self.occ = arr(data.occ)
        self.comf_gate_lo = arr(data.comf_gate_lo).reshape(self.nD, self.N)
        self.comf_gate_hi = arr(data.comf_gate_hi).reshape(self.nD, self.N)
        self.kap_gate = arr(data.kap_gate * data.kap_mask[:, None])
        self.x1_gate = arr(data.x1_gate).reshape(self.nD, self.N)
        self.a1_room = arr(data.a1_room)
        self.b_room = arr(data.b_room)
        self.d1_room = arr(data.d1_room)
        self.d2_room = arr(data.d2_room)
        self.outside = arr(data.outside)
        self.load = arr(data.load)
        self.x_init = arr(data.x_init)
        self.dx_init = arr(data.dx_init)
        self.beta_lo = arr(data.beta_lo)
        self.beta_hi = arr(data.beta_hi)
        self.kap_lo = arr(data.kap_lo)
        self.kap_hi = arr(data.kap_hi)
        self.kap_mask = arr(data.kap_mask)
        self.vsum_lo = arr(data.vsum_lo)
        self.hour_c = arr(data.hour_c)
        self.zone_of_room = iarr(data.zone_of_room)
        self.device_rooms = iarr(data.device_rooms)
        self.hour_a = iarr(data.hour_a)
        self.hour_b = iarr(data.hour_b)
        self.n_hour = len(data.hour_a)

        spans = layout_spans(self.N, self.m, self.nR, self.nD, self.relaxed)
        self.n_total = total_size(spans)
        self.o_u = spans["u"][0]
        self.o_v = spans["v"][0]
        self.o_r = spans["r"][0]
        self.o_tm = spans["tm"][0]
        self.o_tc = spans["tc"][0]
        self.o_w = spans["w"][0]
        self.o_va = spans["va"][0]
        self.o_x = spans["x"][0]
        self.o_dx = spans["dx"][0]
        self.o_p = spans["p"][0]
        self.o_el = spans["el"][0] if self.relaxed else 0
        self.o_eh = spans["eh"][0] if self.relaxed else 0

        cdef int N = self.N, nR = self.nR, nD = self.nD
        self.e_dx = 0
        self.e_ddx = nR * N
        self.e_pmv = self.e_ddx + nD * N
        self.e_mix = self.e_pmv + nD * N
        self.e_hour = self.e_mix + N
        self.n_eq = self.e_hour + self.n_hour
        if self.relaxed:
            self.i_clo = 0
            self.i_chi = nD * N
            self.i_klo = 2 * nD * N
            self.i_khi = self.i_klo + nR * N
            self.i_x1lo = self.i_khi + nR * N
        else:
            self.i_x1lo = 0
        self.i_x1hi = self.i_x1lo + nD * N
        self.i_tc = self.i_x1hi + nD * N
        self.i_uc = self.i_tc + N
        self.i_alo = self.i_uc + N
        self.i_ahi = self.i_alo + N
        self.n_in = self.i_ahi + N

    # ------------------------------------------------------------- residuals

    cdef void _residuals(self, double[::1] x, double[::1] ceq, double[::1] gin):
        cdef int N = self.N, nR = self.nR, nD = self.nD, m = self.m
        cdef int r, rr, s, j, z, e
        cdef double xp, acc, vr, xbar, g, x1v, dxp, vsum

        for r in range(nR):
            z = self.zone_of_room[r]
            for s in range(N):
                acc = 0.0
                for rr in range(nR):
                    xp = self.x_init[rr] if s == 0 else x[self.o_x + rr * N + s - 1]
                    acc += self.a0[r, rr] * xp
                xp = self.x_init[r] if s == 0 else x[self.o_x + r * N + s - 1]
                vr = x[self.o_v + z * N + s]
                ceq[self.e_dx + r * N + s] = (
                    x[self.o_x + r * N + s] - acc
                    - self.a1_room[r] * xp * vr
                    - self.b_room[r] * x[self.o_u + s] * vr
                    - self.d1_room[r] * self.outside[s]
                    - self.d2_room[r] * self.load[r] * self.occ[r, s])

        for j in range(nD):
            r = self.device_rooms[j]
            for s in range(N):
                dxp = self.dx_init[j] if s == 0 else x[self.o_dx + j * N + s - 1]
                ceq[self.e_ddx + j * N + s] = (
                    x[self.o_dx + j * N + s] - self.a0_region * dxp
                    - self.b_region * x[self.o_w + j * N + s])
                ceq[self.e_pmv + j * N + s] = (
                    x[self.o_p + j * N + s]
                    - self.c_temp * (x[self.o_x + r * N + s] + x[self.o_dx + j * N + s])
                    - self.c_v2 * x[self.o_va + j * N + s] * x[self.o_va + j * N + s]
                    - self.c_v1 * x[self.o_va + j * N + s] - self.c_0)

        for s in range(N):
            xbar = 0.0
            for r in range(nR):
                xbar += self.x_init[r] if s == 0 else x[self.o_x + r * N + s - 1]
            xbar /= nR
            ceq[self.e_mix + s] = (x[self.o_tm + s] - x[self.o_r + s] * xbar
                                   - (1.0 - x[self.o_r + s]) * self.outside[s])

        for e in range(self.n_hour):
            if self.hour_b[e] >= 0:
                ceq[self.e_hour + e] = x[self.o_u + self.hour_a[e]] - x[self.o_u + self.hour_b[e]]
            else:
                ceq[self.e_hour + e] = x[self.o_u + self.hour_a[e]] - self.hour_c[e]

        if self.relaxed:
            for j in range(nD):
                r = self.device_rooms[j]
                for s in range(N):
                    g = self.comf_gate_lo[j, s]
                    gin[self.i_clo + j * N + s] = g * (
                        self.beta_lo[j] - x[self.o_el + r] - x[self.o_p + j * N + s]) - (1.0 - g)
                    g = self.comf_gate_hi[j, s]
                    gin[self.i_chi + j * N + s] = g * (
                        x[self.o_p + j * N + s] - self.beta_hi[j] - x[self.o_eh + r]) - (1.0 - g)
            for r in range(nR):
                for s in range(N):
                    g = self.kap_gate[r, s]
                    gin[self.i_klo + r * N + s] = g * (
                        self.c_temp * (self.kap_lo[r] - x[self.o_x + r * N + s])
                        - x[self.o_el + r]) - (1.0 - g)
                    gin[self.i_khi + r * N + s] = g * (
                        self.c_temp * (x[self.o_x + r * N + s] - self.kap_hi[r])
                        - x[self.o_eh + r]) - (1.0 - g)

        for j in range(nD):
            r = self.device_rooms[j]
            for s in range(N):
                dxp = self.dx_init[j] if s == 0 else x[self.o_dx + j * N + s - 1]
                x1v = x[self.o_x + r * N + s] + self.d3 * dxp
                g = self.x1_gate[j, s]
                gin[self.i_x1lo + j * N + s] = g * (self.gamma_lo - x1v) - (1.0 - g)
                gin[self.i_x1hi + j * N + s] = g * (x1v - self.gamma_hi) - (1.0 - g)

        for s in range(N):
            vsum = 0.0
            for z in range(m):
                vsum += x[self.o_v + z * N + s]
            gin[self.i_tc + s] = x[self.o_tc + s] - x[self.o_tm + s]
            gin[self.i_uc + s] = x[self.o_tc + s] - x[self.o_u + s]
            gin[self.i_alo + s] = self.vsum_lo[s] - vsum
            gin[self.i_ahi + s] = vsum - self.vsum_hi

    # --------------------------------------------------------------- adjoint

    cdef void _adjoint(self, double[::1] x, double[::1] y, double[::1] z,
                       double[::1] grad):
        cdef int N = self.N, nR = self.nR, nD = self.nD, m = self.m
        cdef int r, rr, s, j, zz, e
        cdef double yv, xp, vr, dv, g, xbar, dxp, zv, diff

        for r in range(nR):
            zz = self.zone_of_room[r]
            for s in range(N):
                yv = y[self.e_dx + r * N + s]
                if yv == 0.0:
                    continue
                grad[self.o_x + r * N + s] += yv
                vr = x[self.o_v + zz * N + s]
                if s > 0:
                    for rr in range(nR):
                        grad[self.o_x + rr * N + s - 1] -= self.a0[r, rr] * yv
                    grad[self.o_x + r * N + s - 1] -= self.a1_room[r] * vr * yv
                xp = self.x_init[r] if s == 0 else x[self.o_x + r * N + s - 1]
                dv = -(self.a1_room[r] * xp + self.b_room[r] * x[self.o_u + s]) * yv
                grad[self.o_v + zz * N + s] += dv
                grad[self.o_u + s] -= self.b_room[r] * vr * yv

        for j in range(nD):
            r = self.device_rooms[j]
            for s in range(N):
                yv = y[self.e_ddx + j * N + s]
                if yv != 0.0:
                    grad[self.o_dx + j * N + s] += yv
                    if s > 0:
                        grad[self.o_dx + j * N + s - 1] -= self.a0_region * yv
                    grad[self.o_w + j * N + s] -= self.b_region * yv
                yv = y[self.e_pmv + j * N + s]
                if yv != 0.0:
                    grad[self.o_p + j * N + s] += yv
                    grad[self.o_x + r * N + s] -= self.c_temp * yv
                    grad[self.o_dx + j * N + s] -= self.c_temp * yv
                    grad[self.o_va + j * N + s] -= (
                        2.0 * self.c_v2 * x[self.o_va + j * N + s] + self.c_v1) * yv

        for s in range(N):
            yv = y[self.e_mix + s]
            if yv == 0.0:
                continue
            grad[self.o_tm + s] += yv
            xbar = 0.0
            for r in range(nR):
                xbar += self.x_init[r] if s == 0 else x[self.o_x + r * N + s - 1]
            xbar /= nR
            grad[self.o_r + s] -= (xbar - self.outside[s]) * yv
            if s > 0:
                for r in range(nR):
                    grad[self.o_x + r * N + s - 1] -= x[self.o_r + s] * yv / nR

        for e in range(self.n_hour):
            yv = y[self.e_hour + e]
            if yv == 0.0:
                continue
            grad[self.o_u + self.hour_a[e]] += yv
            if self.hour_b[e] >= 0:
                grad[self.o_u + self.hour_b[e]] -= yv

        if self.relaxed:
            for j in range(nD):
                r = self.device_rooms[j]
                for s in range(N):
                    g = self.comf_gate_lo[j, s]
                    zv = z[self.i_clo + j * N + s]
                    if g != 0.0 and zv != 0.0:
                        grad[self.o_p + j * N + s] -= g * zv
                        grad[self.o_el + r] -= g * zv
                    g = self.comf_gate_hi[j, s]
                    zv = z[self.i_chi + j * N + s]
                    if g != 0.0 and zv != 0.0:
                        grad[self.o_p + j * N + s] += g * zv
                        grad[self.o_eh + r] -= g * zv
            for r in range(nR):
                for s in range(N):
                    g = self.kap_gate[r, s]
                    if g == 0.0:
                        continue
                    zv = z[self.i_klo + r * N + s]
                    if zv != 0.0:
                        grad[self.o_x + r * N + s] -= self.c_temp * g * zv
                        grad[self.o_el + r] -= g * zv
                    zv = z[self.i_khi + r * N + s]
                    if zv != 0.0:
                        grad[self.o_x + r * N + s] += self.c_temp * g * zv
                        grad[self.o_eh + r] -= g * zv

        for j in range(nD):
            r = self.device_rooms[j]
            for s in range(N):
                g = self.x1_gate[j, s]
                if g == 0.0:
                    continue
                diff = g * (z[self.i_x1hi + j * N + s] - z[self.i_x1lo + j * N + s])
                if diff != 0.0:
                    grad[self.o_x + r * N + s] += diff
                    if s > 0:
                        grad[self.o_dx + j * N + s - 1] += self.d3 * diff

        for s in range(N):
            zv = z[self.i_tc + s]
            grad[self.o_tc + s] += zv
            grad[self.o_tm + s] -= zv
            zv = z[self.i_uc + s]
            grad[self.o_tc + s] += zv
            grad[self.o_u + s] -= zv
            diff = z[self.i_ahi + s] - z[self.i_alo + s]
            if diff != 0.0:
                for zz in range(m):
                    grad[self.o_v + zz * N + s] += diff

    # ------------------------------------------------------------- objective

    cdef double _objective_grad(self, double[::1] x, double[::1] grad, bint want_grad):
        cdef int N = self.N, nD = self.nD, m = self.m, nR = self.nR
        cdef int s, z, j, r
        cdef double val = 0.0, vsum, heatc, prod, one_plus
        for s in range(N):
            vsum = 0.0
            for z in range(m):
                vsum += x[self.o_v + z * N + s]
            val += (self.theta1 * (x[self.o_u + s] - x[self.o_tc + s]) * vsum
                    + self.theta2 * (x[self.o_tm + s] - x[self.o_tc + s]) * vsum
                    + self.theta3 * vsum * vsum)
            if want_grad:
                grad[self.o_u + s] += self.tau_h * self.theta1 * vsum
                grad[self.o_tc + s] -= self.tau_h * (self.theta1 + self.theta2) * vsum
                grad[self.o_tm + s] += self.tau_h * self.theta2 * vsum
                heatc = self.tau_h * (
                    self.theta1 * (x[self.o_u + s] - x[self.o_tc + s])
                    + self.theta2 * (x[self.o_tm + s] - x[self.o_tc + s])
                    + 2.0 * self.theta3 * vsum)
                for z in range(m):
                    grad[self.o_v + z * N + s] += heatc
            for j in range(nD):
                val += (self.theta4 * x[self.o_w + j * N + s]
                        + self.theta5 * x[self.o_va + j * N + s])
                if want_grad:
                    grad[self.o_w + j * N + s] += self.tau_h * self.theta4
                    grad[self.o_va + j * N + s] += self.tau_h * self.theta5
        val *= self.tau_h
        if self.relaxed:
            prod = self.penalty_w
            for r in range(nR):
                prod *= 1.0 + x[self.o_el + r] + x[self.o_eh + r]
            val += prod
            if want_grad:
                for r in range(nR):
                    one_plus = 1.0 + x[self.o_el + r] + x[self.o_eh + r]
                    grad[self.o_el + r] += prod / one_plus
                    grad[self.o_eh + r] += prod / one_plus
        return val

    # ---------------------------------------------------------- python layer

    def objective(self, x):
        cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        return self._objective_grad(xv, xv, False)

    def objective_grad(self, x):
        cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        grad = np.zeros(self.n_total)
        cdef double[::1] gv = grad
        val = self._objective_grad(xv, gv, True)
        return val, grad

    def constraints(self, x):
        cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        ceq = np.empty(self.n_eq)
        gin = np.empty(self.n_in)
        cdef double[::1] cv = ceq
        cdef double[::1] gv = gin
        self._residuals(xv, cv, gv)
        return ceq, gin

    def jt_products(self, x, y_eq, z_in):
        cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        cdef double[::1] yv = np.ascontiguousarray(y_eq, dtype=np.float64)
        cdef double[::1] zv = np.ascontiguousarray(z_in, dtype=np.float64)
        grad = np.zeros(self.n_total)
        cdef double[::1] gv = grad
        self._adjoint(xv, yv, zv, gv)
        return grad

    def al_value_grad(self, x, lam, mu, rho):
        cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        cdef double[::1] lv = np.ascontiguousarray(lam, dtype=np.float64)
        cdef double[::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
        cdef double rhod = rho
        ceq = np.empty(self.n_eq)
        gin = np.empty(self.n_in)
        grad = np.zeros(self.n_total)
        cdef double[::1] cv = ceq
        cdef double[::1] gv = gin
        cdef double[::1] gr = grad
        self._residuals(xv, cv, gv)

        cdef double[::1] y = np.empty(self.n_eq)
        cdef double[::1] zbuf = np.empty(self.n_in)
        cdef double val, t
        cdef int i
        val = self._objective_grad(xv, gr, True)
        for i in range(self.n_eq):
            val += lv[i] * cv[i] + 0.5 * rhod * cv[i] * cv[i]
            y[i] = lv[i] + rhod * cv[i]
        for i in range(self.n_in):
            t = mv[i] + rhod * gv[i]
            if t > 0.0:
                val += (t * t - mv[i] * mv[i]) / (2.0 * rhod)
                zbuf[i] = t
            else:
                val -= mv[i] * mv[i] / (2.0 * rhod)
                zbuf[i] = 0.0
        self._adjoint(xv, y, zbuf, gr)
        return val, grad

    def feasibility_value_grad(self, x):
        cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        ceq = np.empty(self.n_eq)
        gin = np.empty(self.n_in)
        grad = np.zeros(self.n_total)
        cdef double[::1] cv = ceq
        cdef double[::1] gv = gin
        cdef double[::1] gr = grad
        self._residuals(xv, cv, gv)
        cdef double[::1] y = np.empty(self.n_eq)
        cdef double[::1] zbuf = np.empty(self.n_in)
        cdef double val = 0.0
        cdef int i
        for i in range(self.n_eq):
            val += cv[i] * cv[i]
            y[i] = 2.0 * cv[i]
        for i in range(self.n_in):
            if gv[i] > 0.0:
                val += gv[i] * gv[i]
                zbuf[i] = 2.0 * gv[i]
            else:
                zbuf[i] = 0.0
        self._adjoint(xv, y, zbuf, gr)
        return val, grad
