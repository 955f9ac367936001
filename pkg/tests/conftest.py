import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Eight synthetic samples with edges, shared by the read-only tests."""
    from fingerfusion.data.synth import synth_generate

    path = tmp_path_factory.mktemp("data") / "tiny.ftds"
    synth_generate(path, seed=7, n=8)
    return path
