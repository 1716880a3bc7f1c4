"""Pure-numpy evaluation kernels for the planning NLP.

Mirrors the compiled kernels in ``core.pyx``; block ordering of the
constraint vectors is part of the contract:

equalities:   dyn_x (nR,N) | dyn_dx (nDev,N) | pmv (nDev,N) | mixer (N) | hour (20)
inequalities: [comf_lo | comf_hi | kap_lo | kap_hi]  (relaxed only)
              x1_lo | x1_hi | tc_le_tm | u_ge_tc | agg_lo | agg_hi

Gate-deactivated rows evaluate to the constant -1 so constraint counts are a
pure function of the problem dimensions.
"""

from __future__ import annotations

import numpy as np

from .data import KernelData
from .layout import layout_spans, total_size


class PureEvaluator:
    """Vectorized numpy implementation of the kernel contract."""

    is_compiled = False

    def __init__(self, data: KernelData):
        self.d = data
        d = data
        self.spans = layout_spans(d.n_steps, d.n_zones, d.n_rooms, d.n_device, d.relaxed)
        self.n = total_size(self.spans)
        # zone-membership matrix for room->zone adjoint scatters
        self.zmat = np.zeros((d.n_zones, d.n_rooms))
        self.zmat[d.zone_of_room, np.arange(d.n_rooms)] = 1.0
        self.kg = d.kap_gate * d.kap_mask[:, None]

    # ------------------------------------------------------------------ views

    def _views(self, x: np.ndarray) -> dict[str, np.ndarray]:
        out = {}
        for name, (off, shape) in self.spans.items():
            if name == "__total__":
                continue
            size = int(np.prod(shape)) if shape else 1
            out[name] = x[off:off + size].reshape(shape)
        return out

    def _prev_states(self, vs) -> tuple[np.ndarray, np.ndarray]:
        d = self.d
        xprev = np.empty((d.n_rooms, d.n_steps))
        xprev[:, 0] = d.x_init
        xprev[:, 1:] = vs["x"][:, :-1]
        dxprev = np.empty((d.n_device, d.n_steps))
        if d.n_device:
            dxprev[:, 0] = d.dx_init
            dxprev[:, 1:] = vs["dx"][:, :-1]
        return xprev, dxprev

    # -------------------------------------------------------------- objective

    def objective(self, x: np.ndarray) -> float:
        return self.objective_grad(x)[0]

    def objective_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        d = self.d
        vs = self._views(x)
        grad = np.zeros_like(x)
        gv = self._views(grad)

        vsum = vs["v"].sum(axis=0)
        heat = d.theta1 * (vs["u"] - vs["tc"]) * vsum
        cool = d.theta2 * (vs["tm"] - vs["tc"]) * vsum
        fan = d.theta3 * vsum**2
        val = float(np.sum(heat + cool + fan)) * d.tau_h
        if d.n_device:
            val += d.tau_h * float(d.theta4 * vs["w"].sum() + d.theta5 * vs["va"].sum())

        gv["u"][:] = d.tau_h * d.theta1 * vsum
        gv["tc"][:] = -d.tau_h * (d.theta1 + d.theta2) * vsum
        gv["tm"][:] = d.tau_h * d.theta2 * vsum
        per_zone = d.tau_h * (d.theta1 * (vs["u"] - vs["tc"])
                              + d.theta2 * (vs["tm"] - vs["tc"]) + 2.0 * d.theta3 * vsum)
        gv["v"][:] = per_zone[None, :]
        if d.n_device:
            gv["w"][:] = d.tau_h * d.theta4
            gv["va"][:] = d.tau_h * d.theta5

        if d.relaxed:
            one_plus = 1.0 + vs["el"] + vs["eh"]
            prod = d.penalty_w * float(np.prod(one_plus))
            val += prod
            gv["el"][:] = prod / one_plus
            gv["eh"][:] = prod / one_plus
        return val, grad

    # ------------------------------------------------------------ constraints

    def constraints(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = self.d
        vs = self._views(x)
        xprev, dxprev = self._prev_states(vs)
        v_room = vs["v"][d.zone_of_room, :]

        dyn_x = (vs["x"] - d.a0 @ xprev
                 - d.a1_room[:, None] * xprev * v_room
                 - d.b_room[:, None] * vs["u"][None, :] * v_room
                 - d.d1_room[:, None] * d.outside[None, :]
                 - d.d2_room[:, None] * d.load[:, None] * d.occ)

        xbar_prev = xprev.mean(axis=0)
        mixer = vs["tm"] - vs["r"] * xbar_prev - (1.0 - vs["r"]) * d.outside

        hour = vs["u"][d.hour_a].copy()
        chained = d.hour_b >= 0
        hour[chained] -= vs["u"][d.hour_b[chained]]
        hour[~chained] -= d.hour_c[~chained]

        if d.n_device:
            dyn_dx = vs["dx"] - d.a0_region * dxprev - d.b_region * vs["w"]
            x_dev = vs["x"][d.device_rooms, :]
            pmv = (vs["p"] - d.c_temp * (x_dev + vs["dx"])
                   - d.c_v2 * vs["va"]**2 - d.c_v1 * vs["va"] - d.c_0)
            ceq = np.concatenate([dyn_x.ravel(), dyn_dx.ravel(), pmv.ravel(), mixer, hour])
        else:
            ceq = np.concatenate([dyn_x.ravel(), mixer, hour])

        parts = []
        if d.relaxed:
            if d.n_device:
                el_dev = vs["el"][d.device_rooms]
                eh_dev = vs["eh"][d.device_rooms]
                glo, ghi = d.comf_gate_lo, d.comf_gate_hi
                parts.append((glo * (d.beta_lo[:, None] - el_dev[:, None] - vs["p"])
                              - (1.0 - glo)).ravel())
                parts.append((ghi * (vs["p"] - d.beta_hi[:, None] - eh_dev[:, None])
                              - (1.0 - ghi)).ravel())
            kg = self.kg
            parts.append((kg * (d.c_temp * (d.kap_lo[:, None] - vs["x"]) - vs["el"][:, None])
                          - (1.0 - kg)).ravel())
            parts.append((kg * (d.c_temp * (vs["x"] - d.kap_hi[:, None]) - vs["eh"][:, None])
                          - (1.0 - kg)).ravel())
        if d.n_device:
            x1 = vs["x"][d.device_rooms, :] + d.d3 * dxprev
            g = d.x1_gate
            parts.append((g * (d.gamma_lo - x1) - (1.0 - g)).ravel())
            parts.append((g * (x1 - d.gamma_hi) - (1.0 - g)).ravel())
        vsum = vs["v"].sum(axis=0)
        parts.append(vs["tc"] - vs["tm"])
        parts.append(vs["tc"] - vs["u"])
        parts.append(d.vsum_lo - vsum)
        parts.append(vsum - d.vsum_hi)
        return ceq, np.concatenate(parts)

    # ------------------------------------------------- adjoint (J^T products)

    def jt_products(self, x: np.ndarray, y_eq: np.ndarray, z_in: np.ndarray) -> np.ndarray:
        """J_eq(x)^T y_eq + J_ineq(x)^T z_in via block adjoints."""
        d = self.d
        vs = self._views(x)
        xprev, dxprev = self._prev_states(vs)
        grad = np.zeros_like(x)
        gv = self._views(grad)
        n, nr, nd = d.n_steps, d.n_rooms, d.n_device

        pos = 0
        yd = y_eq[pos:pos + nr * n].reshape(nr, n); pos += nr * n
        if nd:
            ydx = y_eq[pos:pos + nd * n].reshape(nd, n); pos += nd * n
            yp = y_eq[pos:pos + nd * n].reshape(nd, n); pos += nd * n
        ym = y_eq[pos:pos + n]; pos += n
        yh = y_eq[pos:]

        v_room = vs["v"][d.zone_of_room, :]

        # dyn_x adjoints
        gv["x"][:] += yd
        g_xprev = -(d.a0.T @ yd) - d.a1_room[:, None] * v_room * yd
        gv["x"][:, :-1] += g_xprev[:, 1:]
        dv_room = -(d.a1_room[:, None] * xprev + d.b_room[:, None] * vs["u"][None, :]) * yd
        gv["v"][:] += self.zmat @ dv_room
        gv["u"][:] += (-d.b_room[:, None] * v_room * yd).sum(axis=0)

        if nd:
            # dyn_dx adjoints
            gv["dx"][:] += ydx
            gv["dx"][:, :-1] += -d.a0_region * ydx[:, 1:]
            gv["w"][:] += -d.b_region * ydx
            # pmv adjoints
            gv["p"][:] += yp
            gv["x"][d.device_rooms, :] += -d.c_temp * yp
            gv["dx"][:] += -d.c_temp * yp
            gv["va"][:] += -(2.0 * d.c_v2 * vs["va"] + d.c_v1) * yp

        # mixer adjoints
        xbar_prev = xprev.mean(axis=0)
        gv["tm"][:] += ym
        gv["r"][:] += -(xbar_prev - d.outside) * ym
        gv["x"][:, :-1] += -(vs["r"][1:] * ym[1:] / nr)[None, :]

        # hour adjoints
        np.add.at(gv["u"], d.hour_a, yh)
        chained = d.hour_b >= 0
        np.add.at(gv["u"], d.hour_b[chained], -yh[chained])

        # inequality adjoints
        pos = 0
        if d.relaxed:
            if nd:
                zlo = z_in[pos:pos + nd * n].reshape(nd, n); pos += nd * n
                zhi = z_in[pos:pos + nd * n].reshape(nd, n); pos += nd * n
                glo, ghi = d.comf_gate_lo, d.comf_gate_hi
                gv["p"][:] += -glo * zlo + ghi * zhi
                gv["el"][d.device_rooms] += -(glo * zlo).sum(axis=1)
                gv["eh"][d.device_rooms] += -(ghi * zhi).sum(axis=1)
            zklo = z_in[pos:pos + nr * n].reshape(nr, n); pos += nr * n
            zkhi = z_in[pos:pos + nr * n].reshape(nr, n); pos += nr * n
            kg = self.kg
            gv["x"][:] += d.c_temp * kg * (zkhi - zklo)
            gv["el"][:] += -(kg * zklo).sum(axis=1)
            gv["eh"][:] += -(kg * zkhi).sum(axis=1)
        if nd:
            zx_lo = z_in[pos:pos + nd * n].reshape(nd, n); pos += nd * n
            zx_hi = z_in[pos:pos + nd * n].reshape(nd, n); pos += nd * n
            g = d.x1_gate
            diff = g * (zx_hi - zx_lo)
            gv["x"][d.device_rooms, :] += diff
            gv["dx"][:, :-1] += d.d3 * diff[:, 1:]
        ztc = z_in[pos:pos + n]; pos += n
        zuc = z_in[pos:pos + n]; pos += n
        zal = z_in[pos:pos + n]; pos += n
        zah = z_in[pos:pos + n]
        gv["tc"][:] += ztc + zuc
        gv["tm"][:] += -ztc
        gv["u"][:] += -zuc
        gv["v"][:] += (zah - zal)[None, :]
        return grad

    # ------------------------------------------------------- fused AL kernel

    def al_value_grad(self, x, lam, mu, rho) -> tuple[float, np.ndarray]:
        ceq, gin = self.constraints(x)
        val, grad = self.objective_grad(x)
        y = lam + rho * ceq
        z = np.maximum(0.0, mu + rho * gin)
        val += float(lam @ ceq + 0.5 * rho * (ceq @ ceq))
        val += float((z @ z - mu @ mu) / (2.0 * rho))
        grad += self.jt_products(x, y, z)
        return val, grad

    def feasibility_value_grad(self, x) -> tuple[float, np.ndarray]:
        ceq, gin = self.constraints(x)
        gplus = np.maximum(0.0, gin)
        val = float(ceq @ ceq + gplus @ gplus)
        grad = self.jt_products(x, 2.0 * ceq, 2.0 * gplus)
        return val, grad

    def lagrangian_grad(self, x, lam_hat, mu_hat) -> np.ndarray:
        _, grad = self.objective_grad(x)
        return grad + self.jt_products(x, lam_hat, mu_hat)
