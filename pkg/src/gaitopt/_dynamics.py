"""Rigid-body dynamics of the planar 5-link biped.

Generated by tools/gen_dynamics.py -- do not edit by hand.
Coordinates q = [x, z, th, hL, kL, hR, kR]; see the generator for
conventions and the parameter vector layout.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, fastmath=False)
def mass_matrix(q, p):
    q_x = q[0]
    q_z = q[1]
    q_th = q[2]
    q_hL = q[3]
    q_kL = q[4]
    q_hR = q[5]
    q_kR = q[6]
    m_t = p[0]
    c_t = p[1]
    I_t = p[2]
    m_th = p[3]
    c_th = p[4]
    l_th = p[5]
    I_th = p[6]
    m_sh = p[7]
    c_sh = p[8]
    l_sh = p[9]
    I_sh = p[10]
    grav = p[11]
    x0 = 2*m_sh + m_t + 2*m_th
    x1 = c_t*m_t
    x2 = l_th*m_sh
    x3 = c_th*m_th + x2
    x4 = c_sh*m_sh
    x5 = I_th + c_th**2*m_th + l_th**2*m_sh
    x6 = c_sh*x2
    x7 = I_sh + c_sh**2*m_sh
    out = np.empty((7, 7))
    out[0, 0] = x0
    out[0, 1] = 0
    out[1, 0] = out[0, 1]
    out[0, 2] = -x1*math.cos(q_th)
    out[2, 0] = out[0, 2]
    out[0, 3] = x3*math.cos(q_hL)
    out[3, 0] = out[0, 3]
    out[0, 4] = x4*math.cos(q_kL)
    out[4, 0] = out[0, 4]
    out[0, 5] = x3*math.cos(q_hR)
    out[5, 0] = out[0, 5]
    out[0, 6] = x4*math.cos(q_kR)
    out[6, 0] = out[0, 6]
    out[1, 1] = x0
    out[1, 2] = -x1*math.sin(q_th)
    out[2, 1] = out[1, 2]
    out[1, 3] = x3*math.sin(q_hL)
    out[3, 1] = out[1, 3]
    out[1, 4] = x4*math.sin(q_kL)
    out[4, 1] = out[1, 4]
    out[1, 5] = x3*math.sin(q_hR)
    out[5, 1] = out[1, 5]
    out[1, 6] = x4*math.sin(q_kR)
    out[6, 1] = out[1, 6]
    out[2, 2] = I_t + c_t**2*m_t
    out[2, 3] = 0
    out[3, 2] = out[2, 3]
    out[2, 4] = 0
    out[4, 2] = out[2, 4]
    out[2, 5] = 0
    out[5, 2] = out[2, 5]
    out[2, 6] = 0
    out[6, 2] = out[2, 6]
    out[3, 3] = x5
    out[3, 4] = x6*math.cos(q_hL - q_kL)
    out[4, 3] = out[3, 4]
    out[3, 5] = 0
    out[5, 3] = out[3, 5]
    out[3, 6] = 0
    out[6, 3] = out[3, 6]
    out[4, 4] = x7
    out[4, 5] = 0
    out[5, 4] = out[4, 5]
    out[4, 6] = 0
    out[6, 4] = out[4, 6]
    out[5, 5] = x5
    out[5, 6] = x6*math.cos(q_hR - q_kR)
    out[6, 5] = out[5, 6]
    out[6, 6] = x7
    return out


@njit(cache=True, fastmath=False)
def bias_forces(q, dq, p):
    q_x = q[0]
    q_z = q[1]
    q_th = q[2]
    q_hL = q[3]
    q_kL = q[4]
    q_hR = q[5]
    q_kR = q[6]
    dq_x = dq[0]
    dq_z = dq[1]
    dq_th = dq[2]
    dq_hL = dq[3]
    dq_kL = dq[4]
    dq_hR = dq[5]
    dq_kR = dq[6]
    m_t = p[0]
    c_t = p[1]
    I_t = p[2]
    m_th = p[3]
    c_th = p[4]
    l_th = p[5]
    I_th = p[6]
    m_sh = p[7]
    c_sh = p[8]
    l_sh = p[9]
    I_sh = p[10]
    grav = p[11]
    x0 = math.sin(q_kL)
    x1 = c_sh*m_sh
    x2 = dq_kL**2*x1
    x3 = math.sin(q_kR)
    x4 = dq_kR**2*x1
    x5 = math.sin(q_hL)
    x6 = dq_hL**2
    x7 = c_th*m_th
    x8 = x6*x7
    x9 = math.sin(q_hR)
    x10 = dq_hR**2
    x11 = x10*x7
    x12 = l_th*x6
    x13 = m_sh*x12
    x14 = l_th*x10
    x15 = m_sh*x14
    x16 = math.sin(q_th)
    x17 = dq_th**2
    x18 = grav*m_t
    x19 = 2*grav
    x20 = math.cos(q_hL)
    x21 = math.cos(q_hR)
    x22 = grav*x5
    x23 = l_th*m_sh
    x24 = math.sin(q_hL - q_kL)
    x25 = grav*x9
    x26 = math.sin(q_hR - q_kR)
    out = np.empty(7)
    out[0] = c_t*m_t*x16*x17 - x0*x2 - x11*x9 - x13*x5 - x15*x9 - x3*x4 - x5*x8
    out[1] = -c_t*m_t*x17*math.cos(q_th) + m_sh*x19 + m_th*x19 + x11*x21 + x13*x20 + x15*x21 + x18 + x2*math.cos(q_kL) + x20*x8 + x4*math.cos(q_kR)
    out[2] = -c_t*x16*x18
    out[3] = l_th*x2*x24 + x22*x23 + x22*x7
    out[4] = x1*(grav*x0 - x12*x24)
    out[5] = l_th*x26*x4 + x23*x25 + x25*x7
    out[6] = x1*(grav*x3 - x14*x26)
    return out


@njit(cache=True, fastmath=False)
def potential_energy(q, p):
    q_x = q[0]
    q_z = q[1]
    q_th = q[2]
    q_hL = q[3]
    q_kL = q[4]
    q_hR = q[5]
    q_kR = q[6]
    m_t = p[0]
    c_t = p[1]
    I_t = p[2]
    m_th = p[3]
    c_th = p[4]
    l_th = p[5]
    I_th = p[6]
    m_sh = p[7]
    c_sh = p[8]
    l_sh = p[9]
    I_sh = p[10]
    grav = p[11]
    x0 = -q_z
    x1 = math.cos(q_hL)
    x2 = math.cos(q_hR)
    return grav*(-m_sh*(c_sh*math.cos(q_kL) + l_th*x1 + x0) - m_sh*(c_sh*math.cos(q_kR) + l_th*x2 + x0) + m_t*(c_t*math.cos(q_th) + q_z) - m_th*(c_th*x1 + x0) - m_th*(c_th*x2 + x0))

