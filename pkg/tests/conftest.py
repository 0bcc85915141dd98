"""
Pytest configuration and shared fixtures.
This file is automatically loaded by pytest.
"""
import math

import numpy as np
import pytest

from dcrb.config import settings
from dcrb.main import main
from dcrb.schemas import RBConfig
from dcrb.services.noise import (
    CoherentCoupling,
    GateNoise,
    IdleNoise,
    NoiseModel,
    ReadoutError,
    Timing,
)
from dcrb.services.rbproto import get_clifford_table


@pytest.fixture(autouse=True)
def set_test_environment(monkeypatch):
    """Keep tests independent of the developer's .env and shell"""
    monkeypatch.setattr(settings, "ENVIRONMENT", "testing")
    monkeypatch.setattr(settings, "SEED", None)
    monkeypatch.setattr(settings, "LOG_FILE", None)
    monkeypatch.delenv("DCRB_SEED", raising=False)


@pytest.fixture(scope="session")
def clifford_table():
    """Shared 24-element Clifford table"""
    return get_clifford_table()


@pytest.fixture
def rng():
    """Seeded generator so statistical tests are repeatable"""
    return np.random.default_rng(20240601)


@pytest.fixture
def pair_noise():
    """
    Factory for a noise model on (data=0, measured=1). Assignment error sits on the
    measured qubit only, so the data readout is ideal unless data_readout is set.
    damp_measured=False keeps T1/T2 on the data qubit only.
    """
    def _pair_noise(
        eps_r=0.0,
        depol_1q=0.0,
        depol_2q=0.0,
        t1=math.inf,
        t2=math.inf,
        detuning=0.0,
        zz=0.0,
        meas_phase=0.0,
        qnd_flip=0.0,
        data_readout=0.0,
        timing=None,
        damp_measured=True,
    ):
        measured_idle = IdleNoise(t1, t2) if damp_measured else IdleNoise()
        return NoiseModel(
            n_qubits=2,
            readout=(ReadoutError.symmetric(data_readout), ReadoutError.symmetric(eps_r, qnd_flip)),
            idle=(IdleNoise(t1, t2), measured_idle),
            coupling=CoherentCoupling(
                detuning=(detuning, 0.0),
                zz={(0, 1): zz} if zz else {},
                meas_induced_phase=(meas_phase, 0.0),
            ),
            gates=GateNoise(depol_1q, depol_2q),
            timing=timing or Timing(),
        )

    return _pair_noise


@pytest.fixture
def ideal_pair():
    """Noise-free two-qubit model"""
    return NoiseModel.ideal(2)


@pytest.fixture
def small_rb():
    """Short RB grid that keeps trajectory tests fast"""
    return RBConfig(lengths=[0, 5, 10, 20], k=5, seeds=3, shots=40)


@pytest.fixture
def exact_rb():
    """Block counts 0..60 for exact twirled curves"""
    return RBConfig(lengths=list(range(0, 301, 25)), k=5, seeds=1, shots=1)


@pytest.fixture
def zero_noise_file(tmp_path):
    """Noise JSON with every error source switched off"""
    path = tmp_path / "zero_noise.json"
    path.write_text(
        '{"t1": null, "t2": null, "p01": 0.0, "p10": 0.0, "depol_1q": 0.0, "depol_2q": 0.0}'
    )
    return str(path)


@pytest.fixture
def run_cli(capsys):
    """Run the dcrb entry point in-process; returns (exit code, stdout, stderr)"""
    def _run(*argv):
        code = main([str(a) for a in argv])
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return _run
