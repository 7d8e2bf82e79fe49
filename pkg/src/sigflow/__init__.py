"""Path signatures, closed-form signature inversion and log-signature
diffusion for time-series generation."""
__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    ConfigError,
    DepthError,
    DomainError,
    InputError,
    MemoryBudgetError,
    NumericalError,
    ShapeError,
    SigflowError,
)
from .lie import LogSignature, beta_dim, log_signature, lyndon_basis, lyndon_words  # noqa: E402
from .tensor_algebra import (  # noqa: E402
    SampledPath,
    TruncatedTensor,
    signature,
    tensor_exp,
    tensor_log,
    tensor_product,
)
from .words import WordPoly, half_shuffle_right, pair, shuffle  # noqa: E402
from .inversion import (  # noqa: E402
    invert_fourier,
    invert_ortho,
    make_family,
    reconstruct,
)
from .embedding import LogSigEmbedding  # noqa: E402
from .estimators import (  # noqa: E402
    LogSignatureEmbedder,
    ScoreDiffusion,
    SignatureInverter,
    TimeSeriesGenerator,
)

__all__ = [
    "__version__", "SigflowError", "InputError", "ShapeError", "DomainError", "DepthError",
    "MemoryBudgetError", "ConfigError", "NumericalError", "TruncatedTensor", "SampledPath",
    "signature", "tensor_exp", "tensor_log", "tensor_product", "WordPoly", "shuffle",
    "half_shuffle_right", "pair", "LogSignature", "log_signature", "lyndon_basis", "lyndon_words",
    "beta_dim", "invert_fourier", "invert_ortho", "make_family", "reconstruct", "LogSigEmbedding",
    "SignatureInverter", "LogSignatureEmbedder", "ScoreDiffusion", "TimeSeriesGenerator",
]
