import math

import numpy as np

from nhimpact import disk_scenario, state_from_qv
from nhimpact.scenarios import disk_rolling_velocity


def disk_on_wall(params, phi, v_theta, v_phi, x=0.0, theta=0.0):
    sc = disk_scenario(**params)
    spec = sc.system
    R, wall = sc.parameters["R"], sc.parameters["wall"]
    q = np.array([x, wall - R * math.sin(phi), theta, phi])
    return spec, state_from_qv(spec, 0.0, q, disk_rolling_velocity(q, v_theta, v_phi, R))
