"""Physical constants and material data used across the toolkit.

Everything is SI.  Atomic constants for the 9Be+ ground state are pinned
from the standard literature values (hyperfine constant and g-factors from
the precision microwave spectroscopy of Be II); material data for the
thermal model come from common engineering tables.
"""

import scipy.constants as _sc

# fundamental
HBAR = _sc.hbar
H = _sc.h
MU_0 = _sc.mu_0
EPS_0 = _sc.epsilon_0
K_B = _sc.k
MU_B = _sc.physical_constants["Bohr magneton"][0]
MU_N = _sc.physical_constants["nuclear magneton"][0]
E_CHARGE = _sc.e
AMU = _sc.physical_constants["atomic mass constant"][0]
M_ELECTRON = _sc.m_e

# 9Be+ (single valence electron, 2s ^2S_1/2 ground state)
BE9_NUCLEAR_SPIN = 1.5
# hyperfine constant A of the 2s ^2S_1/2 state, Hz (negative: F=2 below F=1)
BE9_HYPERFINE_A = -625.008837048e6
# electronic g-factor of the ^2S_1/2 state
BE9_G_J = 2.00226206
# nuclear g-factor expressed in Bohr magnetons, sign convention
# H_Z = mu_B * B * (g_J * Jz + g_I * Iz); derived from mu_I(9Be) = -1.177432 mu_N
BE9_G_I = -(-1.177432 / BE9_NUCLEAR_SPIN) * (MU_N / MU_B)
# ion mass: 9Be atom minus one electron
BE9_ION_MASS = 9.012183065 * AMU - M_ELECTRON
BE9_ION_CHARGE = E_CHARGE

# default orientation of the static quantization field: in the electrode
# plane, 30 degrees off the trap axis (y), i.e. unit vector in (x, y, z)
B0_DIRECTION = (0.5, 0.8660254037844386, 0.0)

# drive-impedance convention: an excitation power P corresponds to a peak
# conductor current I = sqrt(2 P / R0)
DEFAULT_REFERENCE_OHMS = 50.0

# material properties for the thermal model (engineering-table values)
# thermal conductivity W/(m K), density kg/m^3, specific heat J/(kg K)
MATERIALS = {
    "gold": {"k": 318.0, "rho": 19300.0, "cp": 129.0,
             "resistivity": 2.44e-8},
    "silicon": {"k": 150.0, "rho": 2329.0, "cp": 700.0},
    "silicon_nitride": {"k": 20.0, "rho": 3100.0, "cp": 700.0},
    # spin-on dielectric filling the conductor pockets
    "pocket_dielectric": {"k": 0.15, "rho": 1200.0, "cp": 1500.0},
    "air": {"k": 0.026, "rho": 1.2, "cp": 1005.0},
}

ROOM_TEMPERATURE = 293.15
