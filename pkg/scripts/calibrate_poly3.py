"""Calibrate the jerk-limited profile defaults for the 180 degree move.

The peak rate is fixed to the constant-velocity strategy (pi/3 rad/s).  Two
numbers remain: the acceleration limit and the jerk/acceleration ratio.  They
are chosen so that the move takes 5.3 s and its residual torsion swing on the
nominal plant is 5.07 deg peak to peak, the reference values for this
strategy.  Prints the constants to paste into ``flyingbelt.motion``.

    python3 scripts/calibrate_poly3.py
"""

import math

from scipy.optimize import brentq

from flyingbelt import motion
from flyingbelt.metrics import evaluate_profile
from flyingbelt.multibody import static_equilibrium
from flyingbelt.plant import NOMINAL_PLANT

DURATION = 5.3
TORSION_PKPK = 5.07
VMAX = math.pi / 3.0


def amax_for(ratio: float) -> float:
    return brentq(lambda a: motion.scurve(math.pi, VMAX, a, ratio * a).duration - DURATION, 0.05, 50.0, xtol=1e-14)


def torsion_pkpk(ratio: float, state0) -> float:
    a = amax_for(ratio)
    prof = motion.poly3_profile(0.0, math.pi, VMAX, a, ratio * a)
    return evaluate_profile(prof, NOMINAL_PLANT, state0=state0, target=math.pi).torsion_pkpk


def main():
    state0 = static_equilibrium(NOMINAL_PLANT)
    # on this bracket the swing grows monotonically with the ratio
    ratio = brentq(lambda r: torsion_pkpk(r, state0) - TORSION_PKPK, 2.0, 5.0, xtol=1e-6)
    a = amax_for(ratio)
    sc = motion.scurve(math.pi, VMAX, a, ratio * a)
    print(f"POLY3_JERK_RATIO = {ratio!r}")
    print(f"POLY3_AMAX = {a!r}")
    print(f"# duration {sc.duration:.6f} s, torsion pk-pk {torsion_pkpk(ratio, state0):.4f} deg")


if __name__ == "__main__":
    main()
