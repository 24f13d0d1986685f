"""Generate src/gaitopt/_dynamics.py from the symbolic 5-link model.

Derives the mass matrix, bias forces (Coriolis/centrifugal + gravity) and
potential energy of the planar torso + 2x(thigh, shank) biped in
generalized coordinates q = [x, z, th, hL, kL, hR, kR]:

  * (x, z): hip point (both legs share a single hip joint)
  * th: torso pitch, CCW positive, 0 = upright
  * hL, kL, hR, kR: absolute thigh/shank angles, CCW positive, 0 = straight down

Run from the repo root:  python3 tools/gen_dynamics.py
"""

import sys

import sympy as sp
from sympy.printing.pycode import pycode

Q_NAMES = ["x", "z", "th", "hL", "kL", "hR", "kR"]
P_NAMES = ["m_t", "c_t", "I_t", "m_th", "c_th", "l_th", "I_th",
           "m_sh", "c_sh", "l_sh", "I_sh", "grav"]


def build_model():
    q = sp.Matrix([sp.Symbol(f"q_{n}") for n in Q_NAMES])
    dq = sp.Matrix([sp.Symbol(f"dq_{n}") for n in Q_NAMES])
    p = {n: sp.Symbol(n) for n in P_NAMES}

    x, z, th, hL, kL, hR, kR = q

    def seg(a):
        # unit vector along a leg segment (0 = straight down)
        return sp.Matrix([sp.sin(a), -sp.cos(a)])

    hip = sp.Matrix([x, z])
    up = sp.Matrix([-sp.sin(th), sp.cos(th)])

    coms = []  # (position, mass, inertia, angular coordinate index)
    coms.append((hip + p["c_t"] * up, p["m_t"], p["I_t"], 2))
    for h, k, i_h, i_k in ((hL, kL, 3, 4), (hR, kR, 5, 6)):
        knee = hip + p["l_th"] * seg(h)
        coms.append((hip + p["c_th"] * seg(h), p["m_th"], p["I_th"], i_h))
        coms.append((knee + p["c_sh"] * seg(k), p["m_sh"], p["I_sh"], i_k))

    T = sp.S.Zero
    V = sp.S.Zero
    for pos, m, inertia, ang_idx in coms:
        vel = pos.jacobian(q) * dq
        T += m * (vel.T * vel)[0, 0] / 2 + inertia * dq[ang_idx] ** 2 / 2
        V += m * p["grav"] * pos[1]

    T = sp.expand(sp.trigsimp(sp.expand(T)))
    M = sp.hessian(T, dq)

    # Lagrange: M qdd + bias = Q,  bias = Mdot dq - dT/dq + dV/dq
    Mdot = sp.zeros(7, 7)
    for i in range(7):
        for j in range(7):
            Mdot[i, j] = sum(sp.diff(M[i, j], q[k]) * dq[k] for k in range(7))
    bias = Mdot * dq - sp.Matrix([sp.diff(T, q[i]) for i in range(7)]) \
        + sp.Matrix([sp.diff(V, q[i]) for i in range(7)])
    bias = sp.Matrix([sp.expand(sp.trigsimp(sp.expand(b))) for b in bias])
    return q, dq, p, M, bias, V


def emit_function(name, args_doc, exprs, out_shape, lines):
    subexprs, outs = sp.cse(exprs, optimizations="basic")
    lines.append("@njit(cache=True, fastmath=False)")
    lines.append(f"def {name}({args_doc}):")
    for qi, nm in enumerate(Q_NAMES):
        lines.append(f"    q_{nm} = q[{qi}]")
    if "dq" in args_doc:
        for qi, nm in enumerate(Q_NAMES):
            lines.append(f"    dq_{nm} = dq[{qi}]")
    for pi, nm in enumerate(P_NAMES):
        lines.append(f"    {nm} = p[{pi}]")
    for sym, expr in subexprs:
        lines.append(f"    {sym} = {pycode(expr)}")
    if out_shape is None:
        lines.append(f"    return {pycode(outs[0])}")
    elif len(out_shape) == 1:
        lines.append(f"    out = np.empty({out_shape[0]})")
        for i, e in enumerate(outs):
            lines.append(f"    out[{i}] = {pycode(e)}")
        lines.append("    return out")
    else:
        n, m = out_shape
        lines.append(f"    out = np.empty(({n}, {m}))")
        k = 0
        for i in range(n):
            for j in range(i, m):
                lines.append(f"    out[{i}, {j}] = {pycode(outs[k])}")
                if i != j:
                    lines.append(f"    out[{j}, {i}] = out[{i}, {j}]")
                k += 1
        lines.append("    return out")
    lines.append("")
    lines.append("")


def main():
    q, dq, p, M, bias, V = build_model()
    lines = [
        '"""Rigid-body dynamics of the planar 5-link biped.',
        "",
        "Generated by tools/gen_dynamics.py -- do not edit by hand.",
        "Coordinates q = [x, z, th, hL, kL, hR, kR]; see the generator for",
        "conventions and the parameter vector layout.",
        '"""',
        "",
        "import math",
        "",
        "import numpy as np",
        "from numba import njit",
        "",
        "",
    ]
    upper = [M[i, j] for i in range(7) for j in range(i, 7)]
    emit_function("mass_matrix", "q, p", upper, (7, 7), lines)
    emit_function("bias_forces", "q, dq, p", list(bias), (7,), lines)
    emit_function("potential_energy", "q, p", [V], None, lines)
    out = "/root/pkg/src/gaitopt/_dynamics.py"
    with open(out, "w") as f:
        f.write("\n".join(lines))
    print(f"wrote {out}: {len(lines)} lines")


if __name__ == "__main__":
    sys.exit(main())
