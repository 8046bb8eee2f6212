"""Exception types shared across the toolkit."""


class ManchuOcrError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ManchuOcrError):
    pass


class SpecError(ConfigError):
    """Invalid generation spec (fractions, probabilities, ranges)."""


class TableParseError(ConfigError):
    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnknownToken(ManchuOcrError):
    def __init__(self, text, position):
        super().__init__(f"no table entry matches {text[position:]!r} at position {position}")
        self.position = position


class UnknownGlyph(ManchuOcrError):
    def __init__(self, text, position):
        cp = ord(text[position])
        super().__init__(f"no table entry matches U+{cp:04X} at position {position}")
        self.position = position


class EmptyTruth(ManchuOcrError):
    pass


class IdMismatch(ManchuOcrError):
    pass


class EmptyRunError(ManchuOcrError):
    pass


class BadWindow(ManchuOcrError):
    pass


class MissingGlyph(ManchuOcrError):
    def __init__(self, token, form):
        super().__init__(f"atlas has no glyph for {token!r} ({form})")
        self.token = token
        self.form = form


class NotBinary(ManchuOcrError):
    pass


class EmptyPage(ManchuOcrError):
    pass


class EmptySource(ManchuOcrError):
    pass


class MissingPrediction(ManchuOcrError):
    def __init__(self, sample_id):
        super().__init__(f"no prediction for sample {sample_id!r}")
        self.sample_id = sample_id


class NoErrors(ManchuOcrError):
    pass


class TransportError(ManchuOcrError):
    pass


class RecognizerTimeout(TransportError):
    pass
