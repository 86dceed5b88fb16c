"""Physics-guided diffusion sampling for illumination control.

The package couples a variance-preserving diffusion sampler with two
physically derived guidance energies: an illumination term that matches a
multi-scale smoothed brightness estimate against a Gaussian light prompt,
and a geometry term that matches log cross-color ratios against a source
image. Closed-form score providers and a procedural Lambertian renderer
make the whole pipeline verifiable on small images without any training.
"""

__version__ = "0.1.0"

from .errors import (
    FormatError,
    LumiguideError,
    ParameterError,
    SamplingDivergence,
    ShapeError,
)

__all__ = [
    "__version__",
    "LumiguideError",
    "ParameterError",
    "ShapeError",
    "FormatError",
    "SamplingDivergence",
]
