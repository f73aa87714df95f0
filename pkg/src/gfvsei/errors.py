"""Exception hierarchy shared by every layer of the toolkit."""


class GfvError(Exception):
    """Base class for all errors raised by gfvsei."""


class RangeError(GfvError, ValueError):
    """A value does not fit the field or container it is written into."""


class TruncationError(GfvError):
    """Input ended before a complete syntax element could be read."""


class MalformedCodeError(GfvError):
    """An Exp-Golomb code is not decodable."""


class MalformedStreamError(GfvError):
    """Byte stream violates Annex-B or emulation-prevention rules."""


class ShapeError(GfvError, ValueError):
    """Array shapes disagree with what an operation requires."""


class PredictorError(GfvError):
    """Prediction-mode coding requested without a usable predictor state."""


class PayloadDecodeError(GfvError):
    """A GFV payload is syntactically invalid."""


class PayloadTruncatedError(PayloadDecodeError, TruncationError):
    pass


class ForbiddenDimsError(PayloadDecodeError):
    """Coordinate dimensionality other than 2 or 3 was signalled."""


class PredictorDecodeError(PayloadDecodeError, PredictorError):
    """A prediction-mode payload arrived without a valid decoder state."""


class WeightsError(GfvError):
    """Base class for translator weight-file problems."""


class BadMagicError(WeightsError):
    pass


class ChainError(WeightsError, ShapeError):
    """Consecutive layer dimensions do not connect."""


class TruncatedWeightsError(WeightsError, TruncationError):
    pass


class EmptyKeypointError(GfvError, ValueError):
    pass


class MissingBasePictureError(GfvError):
    pass


class ManifestError(GfvError):
    """The sequence manifest is inconsistent with itself or the base stream."""


class UndefinedRatioError(GfvError, ZeroDivisionError):
    pass
