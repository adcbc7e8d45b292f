from __future__ import annotations

import typing as t


class HyperloopsError(Exception):
    """
    Base class for every error raised by hyperloops.
    """

    def __init__(self, msg: str | None = None):
        super().__init__(msg)
        self.msg = msg

    def __str__(self):
        return self.msg or self.__class__.__name__


class ConfigError(HyperloopsError):
    pass


class HypergraphError(HyperloopsError):
    """
    Holds an error for a single hyperlink of a hypergraph or hyperlink file.
    """

    def __init__(
        self,
        msg: str | None = None,
        hyperlink: t.Iterable[t.Any] | None = None,
        line: int | None = None,
    ):
        """
        :param msg: The error message.
        :param hyperlink: The offending hyperlink, as labels or node indices.
        :param line: The 1-based line number in the source file, when parsing.
        """
        super().__init__(msg)

        self.hyperlink = tuple(sorted(hyperlink, key=str)) if hyperlink is not None else None
        """
        The offending hyperlink (sorted).
        """

        self.line = line
        """
        The line number the hyperlink was read from, if any.
        """

    def __str__(self):
        parts = [self.msg or self.__class__.__name__]
        if self.hyperlink is not None:
            parts.append("hyperlink: " + "+".join(str(x) for x in self.hyperlink))
        if self.line is not None:
            parts.append(f"line {self.line}")
        return ", ".join(parts)


class DuplicateHyperlink(HypergraphError):
    pass


class SingletonHyperlink(HypergraphError):
    pass


class UnknownLabel(HypergraphError):
    pass


class MalformedLine(HypergraphError):
    pass


class SpectrumError(HyperloopsError):
    pass


class NonSquareMatrix(SpectrumError):
    pass


class EnumerationTooLarge(SpectrumError):
    pass


class ModelError(HyperloopsError):
    pass


class NonConvergence(ModelError):
    """
    Raised (in strict mode) when the likelihood maximization does not converge.
    """

    def __init__(self, msg: str | None = None, best: t.Any = None):
        super().__init__(msg)

        self.best = best
        """
        The best iterate reached before giving up.
        """


class DegenerateLabels(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


class InsufficientData(ModelError):
    pass


class BaselineError(HyperloopsError):
    pass


class DivergentSeries(BaselineError):
    pass


class SamplingError(HyperloopsError):
    pass


class TestCountTooLarge(SamplingError):
    __test__ = False


class SamplerExhausted(SamplingError):
    pass


class MetricError(HyperloopsError):
    pass


class EmptyScoreList(MetricError):
    pass


class RankTooLarge(MetricError):
    pass


__all__ = [
    "BaselineError",
    "ConfigError",
    "DegenerateLabels",
    "DimensionMismatch",
    "DivergentSeries",
    "DuplicateHyperlink",
    "EmptyScoreList",
    "EnumerationTooLarge",
    "HypergraphError",
    "HyperloopsError",
    "InsufficientData",
    "MalformedLine",
    "MetricError",
    "ModelError",
    "NonConvergence",
    "NonSquareMatrix",
    "RankTooLarge",
    "SamplerExhausted",
    "SamplingError",
    "SingletonHyperlink",
    "SpectrumError",
    "TestCountTooLarge",
    "UnknownLabel",
]
