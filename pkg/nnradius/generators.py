""" Dependent data-generating processes

Each generator produces one row ``X_1, ..., X_n`` of a triangular array. The
three dependent families (linear state-space, two-state hidden Markov and
FFT Gaussian process) share exact ``Unif[0, 1]`` marginals, so their k-NN
radii can be compared against the i.i.d. uniform benchmark. The latent
AR(1) family has standard-normal marginals and feeds the entropy
experiment.

Generation is a pure function of the :py:class:`SequenceSpec`; the same spec,
seed included, always yields the same bits.
"""

import enum
import functools
import math
from typing import NamedTuple, Optional, TextIO

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtr

from nnradius import streams
from nnradius.errors import ParameterError, ShapeError
from nnradius.geometry import PointSet
from nnradius.protocol import write_matrix


LSS_LOADING_SCALE = 0.9
""" Shared-factor loading scale ``s`` """

LSS_LOADING_DAMPING = 0.3
""" Dimension damping exponent ``gamma`` of the shared loading """

LSS_LOADING_MAX = 0.999
""" Upper clip of the shared loading """

HMM_MU = 1.75
""" Emission mean magnitude before persistence scaling """

HMM_SIGMA = 0.70
""" Emission standard deviation """

AMBIENT_DIM = 20
""" Observed dimension of the entropy experiment """

SIGNAL_DIM = 5
""" Signal dimension of the entropy experiment """

SPECTRUM_TOLERANCE = 1e-6
""" Largest tolerated kernel mismatch of a clamped circulant spectrum """

_MAX_EMBEDDING = 1 << 26


@enum.unique
class Family(enum.IntEnum):
    """ A data-generating process

    .. py:attribute:: IID_UNIFORM

       Independent ``Unif[0, 1]^d`` vectors

    .. py:attribute:: LSS

       Linear Gaussian state-space model with one shared AR(1) factor

    .. py:attribute:: HMM

       Independent two-state hidden Markov chains per coordinate

    .. py:attribute:: GP_FFT

       Stationary Gaussian process per coordinate with an RBF kernel

    .. py:attribute:: LATENT_AR1

       Independent Gaussian AR(1) coordinates, untransformed
    """

    IID_UNIFORM = 1
    LSS = 2
    HMM = 3
    GP_FFT = 4
    LATENT_AR1 = 5

    def __str__(self):
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> 'Family':
        """ Convert from command-line spelling """
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ParameterError(
                f"unknown {cls.__name__.lower()} {text!r}") from None


@enum.unique
class Strength(enum.IntEnum):
    """ Dependence strength setting """

    WEAK = 1
    MEDIUM = 2
    STRONG = 3

    def __str__(self):
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> 'Strength':
        """ Convert from command-line spelling """
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ParameterError(
                f"unknown {cls.__name__.lower()} {text!r}") from None


STRENGTH_TABLE = {
    Family.LSS: (0.02, 0.60, 0.98),
    Family.HMM: (0.70, 0.99, 0.9995),
    Family.GP_FFT: (1.0, 50.0, 200.0),
}
""" Tuning parameter for each strength: AR coefficient, stay probability and
lengthscale respectively """

DEFAULT_BURN_IN = {
    Family.LSS: 400,
    Family.HMM: 400,
    Family.LATENT_AR1: 2000,
}
""" Burn-in steps discarded before the returned row """


class SequenceSpec(NamedTuple):
    """ Complete description of one generated row

    .. py:attribute:: family

        Data-generating process

    .. py:attribute:: n

        Row length

    .. py:attribute:: d

        Dimension of each observation

    .. py:attribute:: strength

        Named dependence setting, or ``None`` when ``parameter`` is given

    .. py:attribute:: parameter

        Explicit tuning parameter; overrides ``strength``

    .. py:attribute:: burn_in

        Discarded warm-up steps, or ``None`` for the family default

    .. py:attribute:: seed

        Unsigned 64-bit stream seed
    """
    family: Family
    n: int
    d: int = 1
    strength: Optional[Strength] = None
    parameter: Optional[float] = None
    burn_in: Optional[int] = None
    seed: int = streams.GLOBAL_SEED

    def tuning_parameter(self) -> Optional[float]:
        """ The family's tuning parameter

        :return: AR coefficient (lss, latent_ar1), stay probability (hmm),
                 lengthscale (gp_fft), or ``None`` for i.i.d. data
        """
        if self.parameter is not None:
            return float(self.parameter)
        if self.family is Family.IID_UNIFORM:
            return None
        if self.family is Family.LATENT_AR1:
            return 0.0
        if self.strength is None:
            raise ParameterError(
                f"{self.family} needs a strength or an explicit parameter")
        return STRENGTH_TABLE[self.family][int(self.strength) - 1]

    def resolved_burn_in(self) -> int:
        """ Burn-in, with the family default filled in """
        if self.burn_in is not None:
            return int(self.burn_in)
        return DEFAULT_BURN_IN.get(self.family, 0)

    def validate(self) -> None:
        """ Raise :py:class:`ParameterError` for an unusable spec """
        if self.n < 1 or self.d < 1:
            raise ParameterError(
                f"n and d must be positive, got n={self.n}, d={self.d}")
        if self.resolved_burn_in() < 0:
            raise ParameterError("burn_in must be nonnegative")


class GeneratedRow(NamedTuple):
    """ One generated row

    .. py:attribute:: data

        Observations; in ``[0, 1]^d`` for the uniform-marginal families

    .. py:attribute:: spec

        Spec that produced the row

    .. py:attribute:: gaussian

        Pre-transform Gaussian series ``(n, d)``, when the family has one
    """
    data: PointSet
    spec: SequenceSpec
    gaussian: Optional[np.ndarray] = None

    def to_csv(self, file_handle: TextIO) -> None:
        """ Write the row as CSV with header ``t,x1..xd``

        :param file_handle: Text stream opened with ``newline=''``
        """
        write_matrix(file_handle, self.data.points, index_name="t",
                     column_prefix="x")


def normal_cdf(z):
    """ Standard normal CDF

    :param z: Scalar or array
    :return: ``Phi(z)``, with the same shape as ``z``
    """
    out = ndtr(z)
    if np.ndim(out) == 0:
        return float(out)
    return out


def mixture_cdf(z, mu_eff: float, sigma: float = HMM_SIGMA):
    """ Stationary CDF of the two-state emission mixture

    :param z: Scalar or array
    :param mu_eff: Effective emission mean magnitude
    :param sigma: Emission standard deviation
    :return: ``F_mix(z)``
    """
    return 0.5 * ndtr((z + mu_eff) / sigma) + 0.5 * ndtr((z - mu_eff) / sigma)


def lss_loading(rho: float, d: int) -> float:
    """ Dimension-damped shared loading of the state-space model """
    raw = LSS_LOADING_SCALE * math.sqrt(abs(rho)) / d ** LSS_LOADING_DAMPING
    return min(max(raw, 0.0), LSS_LOADING_MAX)


def hmm_effective_mean(p_stay: float) -> float:
    """ Emission mean magnitude for a stay probability """
    return HMM_MU * abs(2.0 * p_stay - 1.0) ** 6


def rbf_kernel(h, lengthscale: float):
    """ ``exp(-h^2 / (2 l^2))`` """
    return np.exp(-np.square(h) / (2.0 * lengthscale * lengthscale))


def generate(spec: SequenceSpec) -> GeneratedRow:
    """ Generate a row for any family

    For ``latent_ar1`` ``spec.d`` is the latent dimension and its
    parameter the AR coefficient.

    :param spec: Row description
    :return: Generated row
    """
    if spec.family is Family.IID_UNIFORM:
        return gen_iid_uniform(spec)
    if spec.family is Family.LSS:
        return gen_lss(spec)
    if spec.family is Family.HMM:
        return gen_hmm(spec)
    if spec.family is Family.GP_FFT:
        return gen_gp_fft(spec)
    return gen_latent_ar1(spec, spec.d, spec.tuning_parameter())


def gen_iid_uniform(spec: SequenceSpec) -> GeneratedRow:
    """ Independent uniform vectors on ``[0, 1]^d`` """
    _expect(spec, Family.IID_UNIFORM)
    rng = streams.generator(spec.seed)
    return GeneratedRow(PointSet.from_array(rng.random((spec.n, spec.d))),
                        spec)


def gen_lss(spec: SequenceSpec) -> GeneratedRow:
    """ Linear Gaussian state-space model

    A shared factor ``f_t = rho f_{t-1} + sqrt(1 - rho^2) eta_t`` loads on
    every coordinate, ``z_{t,j} = a f_t + sqrt(1 - a^2) eps_{t,j}``; the
    output is ``Phi(z)``. The factor starts from its stationary law.
    """
    _expect(spec, Family.LSS)
    rho = spec.tuning_parameter()
    if not -1.0 < rho < 1.0:
        raise ParameterError(f"lss needs |rho| < 1, got {rho}")

    rng = streams.generator(spec.seed)
    total = spec.resolved_burn_in() + spec.n
    loading = lss_loading(rho, spec.d)
    f_init = rng.standard_normal()
    eta = rng.standard_normal(total)
    eps = rng.standard_normal((total, spec.d))

    factor, _ = lfilter([math.sqrt(1.0 - rho * rho)], [1.0, -rho], eta,
                        zi=[rho * f_init])
    z = loading * factor[:, np.newaxis] + math.sqrt(1.0 - loading ** 2) * eps
    z = z[total - spec.n:]
    return GeneratedRow(PointSet.from_array(ndtr(z)), spec, _frozen(z))


def gen_hmm(spec: SequenceSpec) -> GeneratedRow:
    """ Per-coordinate two-state hidden Markov chains

    Each chain starts from its stationary law, uniform over both states, and
    stays put with probability ``p_stay``. Emissions are
    ``N((2S - 1) mu_eff, sigma^2)``, mapped through the stationary mixture
    CDF.
    """
    _expect(spec, Family.HMM)
    p_stay = spec.tuning_parameter()
    if not 0.0 < p_stay < 1.0:
        raise ParameterError(f"hmm needs 0 < p_stay < 1, got {p_stay}")

    rng = streams.generator(spec.seed)
    total = spec.resolved_burn_in() + spec.n
    initial = rng.integers(0, 2, size=spec.d)
    switches = rng.random((total, spec.d)) >= p_stay
    noise = rng.standard_normal((total, spec.d))

    states = (initial + np.cumsum(switches, axis=0)) % 2
    mu_eff = hmm_effective_mean(p_stay)
    z = (2.0 * states - 1.0) * mu_eff + HMM_SIGMA * noise
    z = z[total - spec.n:]
    return GeneratedRow(PointSet.from_array(mixture_cdf(z, mu_eff)), spec,
                        _frozen(z))


def gen_gp_fft(spec: SequenceSpec) -> GeneratedRow:
    """ Stationary Gaussian process per coordinate via circulant embedding

    Coordinates are independent; each has lag covariance
    ``exp(-h^2 / (2 l^2))``.
    """
    _expect(spec, Family.GP_FFT)
    lengthscale = spec.tuning_parameter()
    if not lengthscale > 0.0:
        raise ParameterError(
            f"gp_fft needs a positive lengthscale, got {lengthscale}")

    spectrum = circulant_spectrum(spec.n, lengthscale)
    size = spectrum.shape[0]
    rng = streams.generator(spec.seed)
    white = (rng.standard_normal((spec.d, size))
             + 1j * rng.standard_normal((spec.d, size)))
    field = np.fft.fft(np.sqrt(spectrum / size) * white, axis=1)
    z = np.ascontiguousarray(field.real[:, :spec.n].T)
    return GeneratedRow(PointSet.from_array(ndtr(z)), spec, _frozen(z))


@functools.lru_cache(maxsize=64)
def circulant_spectrum(n: int, lengthscale: float) -> np.ndarray:
    """ Nonnegative eigenvalues of the circulant embedding of the RBF kernel

    The embedding length starts at the smallest power of two that is at
    least ``2n`` and doubles until, with negative eigenvalues clamped to
    zero, the embedded covariance matches the kernel within
    :py:data:`SPECTRUM_TOLERANCE` at every lag below ``n``.

    :param n: Number of samples needed
    :param lengthscale: Kernel lengthscale
    :return: Read-only array of eigenvalues; its length is the embedding size
    """
    size = 1 << (2 * n - 1).bit_length()
    while size <= _MAX_EMBEDDING:
        index = np.arange(size)
        cov = rbf_kernel(np.minimum(index, size - index), lengthscale)
        spectrum = np.maximum(np.fft.fft(cov).real, 0.0)
        realised = np.fft.ifft(spectrum).real[:n]
        if np.max(np.abs(realised - cov[:n])) <= SPECTRUM_TOLERANCE:
            spectrum.setflags(write=False)
            return spectrum
        size *= 2
    raise ParameterError(
        f"no circulant embedding reproduces lengthscale {lengthscale}")


def gen_latent_ar1(spec: SequenceSpec, s: int, rho: float) -> GeneratedRow:
    """ Independent stationary Gaussian AR(1) coordinates

    ``Z_t = rho Z_{t-1} + sqrt(1 - rho^2) eps_t`` with ``eps_t ~ N(0, I_s)``,
    started from the stationary law.

    :param spec: Row description; its ``d`` and parameter are replaced by
                 ``s`` and ``rho``
    :param s: Latent dimension
    :param rho: AR coefficient, ``|rho| < 1``
    :return: Row of raw standard-normal-marginal vectors
    """
    if s < 1:
        raise ParameterError(f"latent dimension must be positive, got {s}")
    if not -1.0 < rho < 1.0:
        raise ParameterError(f"latent_ar1 needs |rho| < 1, got {rho}")
    spec = spec._replace(family=Family.LATENT_AR1, d=s, parameter=rho)
    spec.validate()

    rng = streams.generator(spec.seed)
    total = spec.resolved_burn_in() + spec.n
    initial = rng.standard_normal(s)
    eps = rng.standard_normal((total, s))
    z, _ = lfilter([math.sqrt(1.0 - rho * rho)], [1.0, -rho], eps, axis=0,
                   zi=(rho * initial)[np.newaxis, :])
    z = z[total - spec.n:]
    return GeneratedRow(PointSet.from_array(z), spec, _frozen(z))


def orthonormal_map(seed: int, rows: int = AMBIENT_DIM,
                    cols: int = SIGNAL_DIM) -> np.ndarray:
    """ A fixed matrix with orthonormal columns drawn from a seed

    A standard-normal matrix is orthonormalised by QR, with column signs
    chosen so the triangular factor has a positive diagonal.

    :param seed: Global seed
    :param rows: Output dimension
    :param cols: Signal dimension
    :return: ``(rows, cols)`` matrix ``Q`` with ``Q^T Q = I``
    """
    rng = streams.stream(seed, "embed", f"{rows}x{cols}")
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.where(np.diag(r) < 0.0, -1.0, 1.0)


def embed_ambient(latent: GeneratedRow, s: int,
                  seed: int = streams.GLOBAL_SEED) -> GeneratedRow:
    """ Map a latent row into the 20-dimensional observation space

    Latent coordinates occupy the first ``s`` of the five signal
    coordinates, the rest are zero, and the signal is multiplied by
    :py:func:`orthonormal_map`.

    :param latent: Row with ``d == s``
    :param s: Latent dimension, at most five
    :param seed: Seed of the fixed map
    :return: Row with ``d == 20``
    """
    if s > SIGNAL_DIM or s < 1:
        raise ParameterError(
            f"latent dimension must lie in [1, {SIGNAL_DIM}], got {s}")
    if latent.data.d != s:
        raise ShapeError(
            f"latent row has dimension {latent.data.d}, expected {s}")

    signal = np.zeros((latent.data.n, SIGNAL_DIM))
    signal[:, :s] = latent.data.points
    observed = signal @ orthonormal_map(seed).T
    return GeneratedRow(PointSet.from_array(observed),
                        latent.spec._replace(d=AMBIENT_DIM))


def _expect(spec: SequenceSpec, family: Family) -> None:
    if spec.family is not family:
        raise ParameterError(f"spec is for {spec.family}, not {family}")
    spec.validate()


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr
