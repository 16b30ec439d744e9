import pytest

from kfplab import workbench as wb


@pytest.fixture(scope="session")
def plab():
    return wb.build_lab("parabolic")


@pytest.fixture(scope="session")
def klab():
    return wb.build_lab("kolmogorov")


@pytest.fixture(scope="session")
def pcorpus(plab):
    return wb.field_corpus(plab)


@pytest.fixture(scope="session")
def kcorpus(klab):
    return wb.field_corpus(klab)
