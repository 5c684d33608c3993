"""Write the bundled synthetic multi-propeller open-water term file.

The terms follow the Wageningen polynomial layout C * J^S * (P/D)^t *
(AE/A0)^u * Z^v but form a truncated, synthetic set; they are not the
published B-series regression. Propellers whose K_Q turns negative on the
sampled range, or whose open-water efficiency reaches an unphysical level,
are skipped.
"""

import itertools
import sys
from pathlib import Path

import numpy as np

from shipplan.propeller import OpenWaterCurve, WageningenTerms, open_water_efficiency, write_wageningen_csv

ETA_CEILING = 0.95

THRUST = np.array([
    (0.00880496, 0, 0, 0, 0), (-0.204554, 1, 0, 0, 0), (0.166351, 0, 1, 0, 0), (0.158114, 0, 2, 0, 0),
    (-0.147581, 2, 0, 1, 0), (-0.481497, 1, 1, 1, 0), (0.415437, 0, 2, 1, 0), (0.0144043, 0, 0, 0, 1),
    (-0.0530054, 2, 0, 0, 1), (0.0143481, 0, 1, 0, 1), (0.0606826, 1, 1, 0, 1), (-0.0125894, 0, 0, 1, 1),
    (0.0109689, 1, 0, 1, 1), (-0.133698, 0, 3, 0, 0), (0.00638407, 0, 6, 0, 0), (-0.00132718, 2, 6, 0, 0),
    (-0.0234, 3, 1, 0, 0), (0.0121, 3, 0, 1, 0),
])
TORQUE = np.array([
    (0.00379368, 0, 0, 0, 0), (0.00886523, 2, 0, 0, 0), (-0.032241, 1, 1, 0, 0), (0.00344778, 0, 2, 0, 0),
    (-0.0408811, 0, 1, 1, 0), (-0.108009, 1, 1, 1, 0), (-0.0885381, 2, 1, 1, 0), (0.188561, 0, 2, 1, 0),
    (-0.00370871, 1, 0, 0, 1), (0.00513696, 0, 1, 0, 1), (0.0209449, 1, 1, 0, 1), (0.00474319, 2, 1, 0, 1),
    (-0.00723408, 2, 0, 1, 1), (0.00438388, 1, 1, 1, 1), (-0.0269403, 0, 2, 1, 1), (0.0558082, 3, 0, 1, 0),
    (-0.0035, 3, 1, 0, 0),
])


def propellers():
    out = []
    for Z, ae, pd in itertools.product([3, 4, 5], [0.4, 0.55, 0.7], [0.6, 0.8, 1.0, 1.2]):
        p = WageningenTerms(THRUST, TORQUE, Z, ae, pd, f"Z{Z}-AE{ae}-PD{pd}")
        c = OpenWaterCurve.from_terms(p)
        if np.all(c.K_Q > 0) and open_water_efficiency(c.J, c.K_T, c.K_Q).max() < ETA_CEILING:
            out.append(p)
    return out


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parents[1] / "src/shipplan/data/synthetic_wageningen.csv"
    props = propellers()
    write_wageningen_csv(target, props)
    print(f"wrote {len(props)} propellers to {target}")
