import numpy as np
import pytest

from crossmpt.codes import load_code, make_code

TREE_H = np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8)


@pytest.fixture(scope="session")
def hamming():
    return load_code("hamming_7_4")


@pytest.fixture(scope="session")
def tree():
    return make_code(TREE_H, name="tree")


@pytest.fixture(scope="session")
def bch31():
    return load_code("bch_31_16")
