from __future__ import annotations

import pytest

from obstacle_fem.mesh import build_disk_mesh


@pytest.fixture(scope="session")
def mesh2():
    return build_disk_mesh(2)


@pytest.fixture(scope="session")
def mesh4():
    return build_disk_mesh(4)


@pytest.fixture(scope="session")
def mesh8():
    return build_disk_mesh(8)

