import pytest

from parareal import LinearScalarModel, PwmSingle, SineWave, StepWave

PERIOD = 0.02
R_RES = 0.01
L_IND = 0.001


@pytest.fixture(scope="session")
def pwm400_model():
    return LinearScalarModel(R_res=R_RES, L_ind=L_IND, signal=PwmSingle(m=400, period=PERIOD))


@pytest.fixture(scope="session")
def pwm10_model():
    return LinearScalarModel(R_res=R_RES, L_ind=L_IND, signal=PwmSingle(m=10, period=PERIOD))


@pytest.fixture(scope="session")
def sine_model():
    return LinearScalarModel(R_res=R_RES, L_ind=L_IND, signal=SineWave(PERIOD))


@pytest.fixture(scope="session")
def step_signal():
    return StepWave(PERIOD)


@pytest.fixture(scope="session")
def sine_signal():
    return SineWave(PERIOD)
