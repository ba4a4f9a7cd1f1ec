import math

import numpy as np
import pytest

from seisfrag import DemandRecord, IMRecord


def make_records(im_values, deltas, kind="pga"):
    """Demand records with one IM kind populated."""
    records = []
    for i, (a, d) in enumerate(zip(im_values, deltas)):
        fields = {"pga": 0.0, "sa": 0.0, "psa": 0.0, "arias": 0.0,
                  "d595": math.nan, "t_mid_emp": math.nan}
        fields[kind] = float(a)
        records.append(DemandRecord(im=IMRecord(**fields), delta=float(d),
                                    motion_id=f"m{i:06d}"))
    return records


def lognormal_demand_records(rng, n, a=1.2, b=-4.0, zeta=0.3,
                             mu_lnim=0.0, sig_lnim=0.8, kind="pga"):
    """Records from the log-linear demand generator ln d = A ln im + B + zeta Z."""
    ln_im = rng.normal(mu_lnim, sig_lnim, n)
    ln_d = a * ln_im + b + zeta * rng.standard_normal(n)
    return make_records(np.exp(ln_im), np.exp(ln_d), kind)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
