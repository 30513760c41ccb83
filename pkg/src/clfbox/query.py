"""Subset queries: AST, evaluation, and the round-trippable text grammar.

Queries are small immutable ASTs describing a subset of instances. They are
the persistence format for selections (via :func:`describe` and
:func:`parse`) and the payload attached to every view box, so a rendered
element can always be turned back into a live selection.

Grammar (atoms / combinators):

    correct(<clf>)   incorrect(<clf>)   pred(<clf>)=<label>   actual=<label>
    <feature> in [lo,hi)   <feature> in [lo,hi]   <feature>=<category>
    ncorrect=<k>   split=<train|test|all>   ids{i,j,...}
    NOT q     a AND b     a OR b     a DIFF b     parentheses

``NOT`` binds tightest, then ``AND``/``DIFF`` (left-associative, equal
precedence), then ``OR``. Names that collide with keywords or contain
anything beyond ``[A-Za-z0-9_.+-]`` are double-quoted. Complements are taken
within the evaluation scope, not the full dataset, so descriptions stay
truthful under scope filtering.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .bitset import InstanceSet
from .dataset import SCOPES, ExperimentDataset
from . import _kernels as K
from .errors import InvalidQuery, QueryParseError, UniverseMismatch

COMBINE_OPS = ("union", "intersection", "difference", "symmetric_difference")


class Query:
    """Base class; nodes are frozen dataclasses below."""

    __slots__ = ()


@dataclass(frozen=True)
class Empty(Query):
    pass


@dataclass(frozen=True)
class ClassifierCorrect(Query):
    classifier: str


@dataclass(frozen=True)
class ClassifierIncorrect(Query):
    classifier: str


@dataclass(frozen=True)
class Predicted(Query):
    classifier: str
    label: str


@dataclass(frozen=True)
class Actual(Query):
    label: str


@dataclass(frozen=True)
class FeatureRange(Query):
    feature: str
    lo: float
    hi: float
    include_hi: bool = False
    bin_label: str | None = field(default=None, compare=False)


@dataclass(frozen=True)
class FeatureEquals(Query):
    feature: str
    category: str


@dataclass(frozen=True)
class CumulativeCount(Query):
    k: int


@dataclass(frozen=True)
class Scope(Query):
    scope: str


@dataclass(frozen=True)
class InstanceIds(Query):
    ids: tuple[int, ...]


@dataclass(frozen=True)
class Combine(Query):
    op: str
    left: Query
    right: Query

    def __post_init__(self):
        if self.op not in COMBINE_OPS:
            raise InvalidQuery(f"unknown combine op {self.op!r}")


@dataclass(frozen=True)
class Not(Query):
    query: Query


# -- evaluation ----------------------------------------------------------------


def evaluate(query: Query, dataset: ExperimentDataset, scope: str = "all") -> InstanceSet:
    """Evaluate a query to an instance set.

    ``scope`` fixes the universe used for complements (``NOT``); atoms are
    not themselves scope-filtered — callers intersect with the scope set
    when they need scoped counts.
    """
    n = dataset.n
    if isinstance(query, Empty):
        return InstanceSet.empty(n)
    if isinstance(query, ClassifierCorrect):
        return InstanceSet(n, dataset.correct_words(query.classifier))
    if isinstance(query, ClassifierIncorrect):
        correct = InstanceSet(n, dataset.correct_words(query.classifier))
        return dataset.scope_set(scope).difference(correct)
    if isinstance(query, Predicted):
        pred = dataset.prediction_column(query.classifier)
        label_id = dataset.labels.index(query.label)
        return InstanceSet(n, K.filter_eq(pred, label_id, n))
    if isinstance(query, Actual):
        label_id = dataset.labels.index(query.label)
        return InstanceSet(n, K.filter_eq(dataset.actual, label_id, n))
    if isinstance(query, FeatureRange):
        schema = dataset.feature(query.feature)
        if schema.kind != "continuous":
            raise InvalidQuery(f"feature {query.feature!r} is not continuous")
        if not (query.lo <= query.hi):
            raise InvalidQuery(f"range has lo > hi: [{query.lo}, {query.hi}]")
        column = dataset.feature_column(query.feature)
        return InstanceSet(n, K.filter_range(column, query.lo, query.hi, query.include_hi, n))
    if isinstance(query, FeatureEquals):
        schema = dataset.feature(query.feature)
        if schema.kind != "categorical":
            raise InvalidQuery(f"feature {query.feature!r} is not categorical")
        code = schema.category_index(query.category)
        column = dataset.feature_column(query.feature)
        return InstanceSet(n, K.filter_eq(column, code, n))
    if isinstance(query, CumulativeCount):
        if not 0 <= query.k <= dataset.m:
            raise InvalidQuery(f"ncorrect={query.k} outside 0..{dataset.m}")
        return InstanceSet(n, K.filter_eq(dataset.ncorrect_codes(), query.k, n))
    if isinstance(query, Scope):
        return dataset.scope_set(query.scope)
    if isinstance(query, InstanceIds):
        if any(i < 0 or i >= n for i in query.ids):
            raise UniverseMismatch(f"instance index outside universe 0..{n - 1}")
        return InstanceSet.from_indices(n, query.ids)
    if isinstance(query, Combine):
        left = evaluate(query.left, dataset, scope)
        right = evaluate(query.right, dataset, scope)
        return getattr(left, query.op)(right)
    if isinstance(query, Not):
        return dataset.scope_set(scope).difference(evaluate(query.query, dataset, scope))
    raise InvalidQuery(f"unknown query node {type(query).__name__}")


# -- description ---------------------------------------------------------------

_BARE_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.+-]*\Z")
_KEYWORDS = {"correct", "incorrect", "pred", "actual", "ncorrect", "split", "ids",
             "AND", "OR", "NOT", "DIFF", "in", "train", "test", "all"}

# precedence levels used for parenthesization
_LEVEL_OR = 1
_LEVEL_AND = 2
_LEVEL_NOT = 3
_LEVEL_ATOM = 4

_OP_TOKEN = {"union": "OR", "intersection": "AND", "difference": "DIFF"}
_OP_LEVEL = {"union": _LEVEL_OR, "intersection": _LEVEL_AND, "difference": _LEVEL_AND}


def _quote(name: str) -> str:
    if _BARE_NAME.match(name) and name not in _KEYWORDS:
        return name
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _num(x: float) -> str:
    return repr(int(x)) if isinstance(x, int) else repr(float(x))


def describe(query: Query) -> str:
    """Deterministic textual rendering; ``parse`` inverts it up to set equality."""
    return _describe(query)[0]


def _describe(query: Query) -> tuple[str, int]:
    if isinstance(query, Empty):
        return "ids{}", _LEVEL_ATOM
    if isinstance(query, ClassifierCorrect):
        return f"correct({_quote(query.classifier)})", _LEVEL_ATOM
    if isinstance(query, ClassifierIncorrect):
        return f"incorrect({_quote(query.classifier)})", _LEVEL_ATOM
    if isinstance(query, Predicted):
        return f"pred({_quote(query.classifier)})={_quote(query.label)}", _LEVEL_ATOM
    if isinstance(query, Actual):
        return f"actual={_quote(query.label)}", _LEVEL_ATOM
    if isinstance(query, FeatureRange):
        close = "]" if query.include_hi else ")"
        return (
            f"{_quote(query.feature)} in [{_num(query.lo)},{_num(query.hi)}{close}",
            _LEVEL_ATOM,
        )
    if isinstance(query, FeatureEquals):
        return f"{_quote(query.feature)}={_quote(query.category)}", _LEVEL_ATOM
    if isinstance(query, CumulativeCount):
        return f"ncorrect={query.k}", _LEVEL_ATOM
    if isinstance(query, Scope):
        return f"split={query.scope}", _LEVEL_ATOM
    if isinstance(query, InstanceIds):
        return "ids{" + ",".join(str(i) for i in sorted(query.ids)) + "}", _LEVEL_ATOM
    if isinstance(query, Not):
        inner, level = _describe(query.query)
        if level < _LEVEL_NOT:
            inner = f"({inner})"
        return f"NOT {inner}", _LEVEL_NOT
    if isinstance(query, Combine):
        if query.op == "symmetric_difference":
            # not in the grammar: render the equivalent union-minus-intersection
            expanded = Combine(
                "difference",
                Combine("union", query.left, query.right),
                Combine("intersection", query.left, query.right),
            )
            return _describe(expanded)
        level = _OP_LEVEL[query.op]
        left, left_level = _describe(query.left)
        right, right_level = _describe(query.right)
        if left_level < level:
            left = f"({left})"
        if right_level <= level:  # left-associative: parenthesize equal-level right child
            right = f"({right})"
        return f"{left} {_OP_TOKEN[query.op]} {right}", level
    raise InvalidQuery(f"cannot describe query node {type(query).__name__}")


# -- parsing ---------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<num>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
      | (?P<quoted>"(?:[^"\\]|\\.)*")
      | (?P<name>[A-Za-z_][A-Za-z0-9_.+-]*)
      | (?P<punct>[()\[\]{}=,])
    )""",
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if not match:
            if text[pos:].strip() == "":
                break
            raise QueryParseError(f"bad character at position {pos}: {text[pos:pos + 10]!r}")
        pos = match.end()
        if match.lastgroup == "quoted":
            raw = match.group("quoted")[1:-1]
            value = raw.replace('\\"', '"').replace("\\\\", "\\")
            tokens.append(("quoted", value))
        else:
            tokens.append((match.lastgroup, match.group(match.lastgroup)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> tuple[str, str] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> tuple[str, str]:
        token = self.peek()
        if token is None:
            raise QueryParseError(f"unexpected end of query: {self.text!r}")
        self.pos += 1
        return token

    def expect(self, kind: str, value: str | None = None) -> str:
        token_kind, token_value = self.next()
        if token_kind != kind or (value is not None and token_value != value):
            want = value if value is not None else kind
            raise QueryParseError(f"expected {want!r}, got {token_value!r} in {self.text!r}")
        return token_value

    def parse(self) -> Query:
        query = self.expr()
        if self.peek() is not None:
            raise QueryParseError(f"trailing input after query: {self.tokens[self.pos:]}")
        return query

    def expr(self) -> Query:
        node = self.term()
        while self.peek() == ("name", "OR"):
            self.next()
            node = Combine("union", node, self.term())
        return node

    def term(self) -> Query:
        node = self.factor()
        while self.peek() in (("name", "AND"), ("name", "DIFF")):
            _, op = self.next()
            node = Combine("intersection" if op == "AND" else "difference", node, self.factor())
        return node

    def factor(self) -> Query:
        token = self.peek()
        if token == ("name", "NOT"):
            self.next()
            return Not(self.factor())
        if token == ("punct", "("):
            self.next()
            node = self.expr()
            self.expect("punct", ")")
            return node
        return self.atom()

    def atom(self) -> Query:
        kind, value = self.next()
        if kind == "name" and value in ("correct", "incorrect") and self.peek() == ("punct", "("):
            self.next()
            clf = self.name()
            self.expect("punct", ")")
            return ClassifierCorrect(clf) if value == "correct" else ClassifierIncorrect(clf)
        if kind == "name" and value == "pred" and self.peek() == ("punct", "("):
            self.next()
            clf = self.name()
            self.expect("punct", ")")
            self.expect("punct", "=")
            return Predicted(clf, self.name())
        if kind == "name" and value == "actual":
            self.expect("punct", "=")
            return Actual(self.name())
        if kind == "name" and value == "ncorrect":
            self.expect("punct", "=")
            return CumulativeCount(self.int_value())
        if kind == "name" and value == "split":
            self.expect("punct", "=")
            scope = self.expect("name")
            if scope not in SCOPES:
                raise QueryParseError(f"bad split value {scope!r}")
            return Scope(scope)
        if kind == "name" and value == "ids" and self.peek() == ("punct", "{"):
            self.next()
            ids = []
            if self.peek() != ("punct", "}"):
                ids.append(self.int_value())
                while self.peek() == ("punct", ","):
                    self.next()
                    ids.append(self.int_value())
            self.expect("punct", "}")
            return InstanceIds(tuple(ids)) if ids else Empty()
        if kind in ("name", "quoted"):
            token = self.peek()
            if token == ("punct", "="):
                self.next()
                return FeatureEquals(value, self.name())
            if token == ("name", "in"):
                self.next()
                self.expect("punct", "[")
                lo = self.float_value()
                self.expect("punct", ",")
                hi = self.float_value()
                k, closer = self.next()
                if k != "punct" or closer not in (")", "]"):
                    raise QueryParseError(f"range must end with ')' or ']', got {closer!r}")
                return FeatureRange(value, lo, hi, include_hi=closer == "]")
            raise QueryParseError(f"dangling name {value!r} in {self.text!r}")
        raise QueryParseError(f"unexpected token {value!r} in {self.text!r}")

    def name(self) -> str:
        kind, value = self.next()
        if kind == "quoted":
            return value
        if kind == "name":
            return value
        if kind == "num":
            return value  # labels/categories may be numeric-looking strings
        raise QueryParseError(f"expected a name, got {value!r}")

    def int_value(self) -> int:
        value = self.expect("num")
        try:
            return int(value)
        except ValueError:
            raise QueryParseError(f"expected an integer, got {value!r}") from None

    def float_value(self) -> float:
        return float(self.expect("num"))


def parse(text: str) -> Query:
    """Parse grammar text back to a query; inverse of :func:`describe`."""
    if not text.strip():
        raise QueryParseError("empty query text")
    return _Parser(text).parse()
