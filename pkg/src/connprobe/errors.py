"""Exception types raised across the toolkit."""


class ConnprobeError(Exception):
    """Base class for all toolkit errors."""


# --- lexicon ---

class EmptyLexicon(ConnprobeError):
    pass


class DuplicateEntry(ConnprobeError):
    def __init__(self, word):
        super().__init__(f"duplicate lexicon entry: {word!r}")
        self.word = word


class UnknownType(ConnprobeError):
    def __init__(self, row):
        super().__init__(f"unknown connective type in row: {row!r}")
        self.row = row


class EmptyCorpus(ConnprobeError):
    pass


# --- corpus ---

class MalformedRow(ConnprobeError):
    def __init__(self, line, detail=""):
        msg = f"malformed row at line {line}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.line = line


class UnknownLabel(ConnprobeError):
    def __init__(self, label, line):
        super().__init__(f"unknown label {label!r} at line {line}")
        self.label = label
        self.line = line


class MissingSplit(ConnprobeError):
    def __init__(self, split, detail=""):
        msg = f"missing split: {split}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.split = split


class NoConnective(ConnprobeError):
    def __init__(self, example_id):
        super().__init__(f"no tagged connective in example {example_id!r}")
        self.example_id = example_id


class MultipleConnectives(ConnprobeError):
    def __init__(self, example_id):
        super().__init__(f"more than one tagged connective in example {example_id!r}")
        self.example_id = example_id


class EmptyClause(ConnprobeError):
    def __init__(self, example_id):
        super().__init__(f"connective does not separate two non-empty clauses in {example_id!r}")
        self.example_id = example_id


# --- embed ---

class DimensionMismatch(ConnprobeError):
    pass


class UnparseableFloat(ConnprobeError):
    def __init__(self, line):
        super().__init__(f"unparseable float at line {line}")
        self.line = line


class EmptyFile(ConnprobeError):
    pass


class UnknownSpace(ConnprobeError):
    def __init__(self, name):
        super().__init__(f"unknown embedding space: {name!r}")
        self.name = name


class MissingEmbedding(ConnprobeError):
    def __init__(self, example_id, condition):
        super().__init__(f"no stored embedding for id={example_id!r} condition={condition!r}")
        self.example_id = example_id
        self.condition = condition


class ServiceUnavailable(ConnprobeError):
    pass


class ContractViolation(ConnprobeError):
    pass


# --- perturb ---

class NoMatchingConnective(ConnprobeError):
    pass


class TargetNotInLexicon(ConnprobeError):
    def __init__(self, word):
        super().__init__(f"switch target not in lexicon: {word!r}")
        self.word = word


# --- probe ---

class DegenerateInput(ConnprobeError):
    pass


class NonFiniteFeature(ConnprobeError):
    pass


class EmptySet(ConnprobeError):
    pass


# --- analysis ---

class EmptySubset(ConnprobeError):
    pass


class MissingBaseline(ConnprobeError):
    pass


class EmptyFamily(ConnprobeError):
    pass


class SubsetMismatch(ConnprobeError):
    pass


class InsufficientRuns(ConnprobeError):
    pass


class InsufficientData(ConnprobeError):
    pass


class ZeroVariance(ConnprobeError):
    pass


class IncompleteGrid(ConnprobeError):
    def __init__(self, missing):
        preview = ", ".join(str(m) for m in list(missing)[:8])
        more = "" if len(missing) <= 8 else f" (+{len(missing) - 8} more)"
        super().__init__(f"incomplete results grid; missing cells: {preview}{more}")
        self.missing = list(missing)


# --- cli ---

class ConfigError(ConnprobeError):
    def __init__(self, key, detail):
        super().__init__(f"config error at {key}: {detail}")
        self.key = key
