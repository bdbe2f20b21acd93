import numpy as np
import pytest

from pfsi.errors import InputDomainError
from pfsi.oracles import (ORACLES, OracleReport, compressive_velocity, density_fd_oracle,
                          density_fd_richardson_case)


def test_registry_names():
    assert {"gram-time", "gram-beam", "gram-fluid", "structure-dense", "density-fd",
            "density-fd-richardson", "fluid-fd"} == set(ORACLES)


def test_report_line_and_verdict():
    rep = OracleReport("x", 2e-5, 1e-4, {})
    assert rep.passed and rep.line().startswith("x") and rep.line().endswith("ok")
    assert not OracleReport("x", 2e-4, 1e-4, {}).passed


def test_fd_oracle_constant_solution():
    vals = np.zeros((2, 8, 8, 8))
    rho = density_fd_oracle(vals, 0.1, 1.7, (1.0, 1.0, 2.0))
    np.testing.assert_allclose(rho, 1.7, atol=1e-12)


def test_fd_oracle_grid_cap():
    with pytest.raises(InputDomainError):
        density_fd_oracle(np.zeros((2, 4, 4, 128)), 0.1, 1.0, (1.0, 1.0, 2.0))


def test_compressive_field_is_not_trivial():
    u = compressive_velocity()
    t, x, z = np.arange(4) / 4, np.arange(8) / 8, np.arange(8) / 4
    vals = u.evaluate(t, x, z)
    assert np.abs(vals[0]).max() > 0.15 and np.abs(vals[1]).max() > 0.09


def test_richardson_case_is_second_order():
    rep = density_fd_richardson_case(nodes=32)
    assert 3.5 < rep.detail["order_ratio"] < 4.5
    assert rep.deviation < 0.1 * rep.detail["raw_fine"]
