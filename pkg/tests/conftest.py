import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20220608)


@pytest.fixture
def write_prices(tmp_path):
    def _write(name, rows, header="date,price"):
        path = tmp_path / name
        path.write_text(header + "\n" + "".join(f"{d},{p}\n" for d, p in rows))
        return path
    return _write
