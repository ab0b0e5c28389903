import numpy as np
import pytest

from logeuler.spectral import Field, Grid


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)


def random_field(grid: Grid, rng, band: int = 0) -> Field:
    """White-noise field, optionally band-limited to |j| <= band."""
    vals = rng.standard_normal((grid.n, grid.n))
    if band:
        spec = np.fft.fft2(vals)
        j = np.abs(np.fft.fftfreq(grid.n) * grid.n)
        keep = (j[:, None] <= band) & (j[None, :] <= band)
        vals = np.fft.ifft2(spec * keep).real
    return Field(grid, vals)


def oddify(values: np.ndarray, axes=(0, 1)) -> np.ndarray:
    """Antisymmetrize grid values about the origin along the given axes."""
    out = values.copy()
    for axis in axes:
        refl = np.roll(np.flip(out, axis=axis), 1, axis=axis)
        out = 0.5 * (out - refl)
    return out
