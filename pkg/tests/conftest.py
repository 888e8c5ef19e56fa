import numpy as np
import pytest

import pegrid
from pegrid.world import load_map


@pytest.fixture(scope="session")
def city_grid():
    return load_map(pegrid.default_map_text())


@pytest.fixture(scope="session")
def open9():
    return load_map("\n".join(["." * 9] * 9) + "\n")


@pytest.fixture(scope="session")
def open5():
    return load_map("\n".join(["." * 5] * 5) + "\n")


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def random_map_text(rng, width=20, height=20, p_building=0.15, p_foliage=0.12):
    """Random map document; not necessarily connected (callers decide)."""
    glyphs = rng.choice(
        np.array(list(".#~")), size=(height, width), p=[1 - p_building - p_foliage, p_building, p_foliage]
    )
    return "\n".join("".join(row) for row in glyphs) + "\n"


def random_connected_map(rng, width=20, height=20, p_building=0.15, p_foliage=0.12):
    """Rejection-sample a loadable (connected) random map."""
    from pegrid.errors import DisconnectedMapError

    while True:
        try:
            return load_map(random_map_text(rng, width, height, p_building, p_foliage))
        except DisconnectedMapError:
            continue
