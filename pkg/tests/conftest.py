import pytest

from gwilab import DistributionSpec, validate_condition_A


@pytest.fixture(scope="session")
def geo_model():
    """Geometric(1/2) offspring with geometric(1/3) immigration: sigma = 2."""
    return validate_condition_A(DistributionSpec.geometric(0.5),
                                DistributionSpec.geometric(1.0 / 3.0))


@pytest.fixture(scope="session")
def explicit_model():
    """Three-point offspring {1/4,1/2,1/4} with immigration {1/2,1/2}: sigma = 2."""
    return validate_condition_A(DistributionSpec.explicit((0.25, 0.5, 0.25)),
                                DistributionSpec.explicit((0.5, 0.5)))
