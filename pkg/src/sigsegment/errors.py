"""Exception hierarchy shared by every stage of the pipeline."""


class SigSegmentError(Exception):
    """Base class for all errors raised by this package."""


class MissingFile(SigSegmentError, FileNotFoundError):
    pass


class IoFailure(SigSegmentError, OSError):
    pass


class MalformedPgm(SigSegmentError, ValueError):
    pass


class MalformedManifest(SigSegmentError, ValueError):
    pass


class MalformedFile(SigSegmentError, ValueError):
    """Binary mean-frame or model file with a bad magic, version or size."""


class DimensionMismatch(SigSegmentError, ValueError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class EmptySequence(SigSegmentError, ValueError):
    pass


class EmptySignal(SigSegmentError, ValueError):
    pass


class BadTargetSize(SigSegmentError, ValueError):
    pass


class BadWindow(SigSegmentError, ValueError):
    pass


class BadHyperparams(SigSegmentError, ValueError):
    pass


class ShapeMismatch(SigSegmentError, ValueError):
    pass


class BadLabel(SigSegmentError, ValueError):
    pass


class UnlabeledSample(SigSegmentError, ValueError):
    pass


class EmptyDataset(SigSegmentError, ValueError):
    pass


class EmptyInterval(SigSegmentError, ValueError):
    pass


class DegenerateSegment(SigSegmentError, ValueError):
    pass


class EmptyGroundTruth(SigSegmentError, ValueError):
    pass


class BadConfig(SigSegmentError, ValueError):
    pass
