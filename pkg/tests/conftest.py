import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bitflip_qec.device import noiseless, table_s1


@pytest.fixture(scope="session")
def noiseless_params():
    return noiseless()


@pytest.fixture(scope="session")
def s1_params():
    return table_s1()
