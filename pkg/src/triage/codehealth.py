"""Per-file code-health sub-factors and the 1-10 composite score.

The analyzer is lexical, not a parser. Source text first goes through a
small string/comment stripper so that keywords inside literals and comments
are never counted; the remaining text is tokenized and scanned for function
units, block nesting, decision points and duplicated line windows.

Two dialects are supported:

``brace``
    C-family languages where blocks are delimited by ``{`` and ``}``
    (C, C++, Java, JavaScript, TypeScript, Go, Rust, C#, ...).
``indent``
    Indentation-delimited languages (Python).
"""

from __future__ import annotations

import hashlib
import json
import keyword
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from pathlib import PurePath

from .errors import AnalysisError, ConfigurationError, DomainError

SUB_FACTORS = (
    "cyclomatic_max",
    "cyclomatic_mean",
    "file_loc",
    "function_length_max",
    "nesting_depth_max",
    "arg_count_max",
    "duplication_ratio",
    "identifier_shortness",
)

DIALECTS = ("brace", "indent")

EXTENSION_DIALECTS = {
    ".py": "indent", ".pyi": "indent", ".pyw": "indent",
    ".c": "brace", ".h": "brace", ".cc": "brace", ".cpp": "brace",
    ".cxx": "brace", ".hpp": "brace", ".hh": "brace", ".java": "brace",
    ".js": "brace", ".mjs": "brace", ".cjs": "brace", ".jsx": "brace",
    ".ts": "brace", ".tsx": "brace", ".go": "brace", ".rs": "brace",
    ".cs": "brace", ".kt": "brace", ".kts": "brace", ".swift": "brace",
    ".scala": "brace", ".php": "brace", ".dart": "brace",
}

DUPLICATION_WINDOW = 6
SHORT_IDENTIFIER = 3


@dataclass(frozen=True)
class SubFactorVector:
    """Eight per-file quality measurements.

    Counts produced by :func:`analyze_file` are integral; the fields are
    typed as floats because synthetic corpora place sub-factors on a
    continuous scale.
    """

    cyclomatic_max: float = 0.0
    cyclomatic_mean: float = 0.0
    file_loc: float = 0.0
    function_length_max: float = 0.0
    nesting_depth_max: float = 0.0
    arg_count_max: float = 0.0
    duplication_ratio: float = 0.0
    identifier_shortness: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value) or value < 0:
                raise DomainError(f"{f.name} must be finite and >= 0, got {value!r}")
        for name in ("duplication_ratio", "identifier_shortness"):
            if getattr(self, name) > 1:
                raise DomainError(f"{name} is a fraction, got {getattr(self, name)!r}")

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    def values(self) -> list[float]:
        return [getattr(self, name) for name in SUB_FACTORS]

    @classmethod
    def from_dict(cls, data: dict) -> "SubFactorVector":
        missing = set(SUB_FACTORS) - set(data)
        if missing:
            raise DomainError(f"missing sub-factors: {sorted(missing)}")
        return cls(**{name: float(data[name]) for name in SUB_FACTORS})


class Band(str, Enum):
    HEALTHY = "Healthy"
    PROBLEMATIC = "Problematic"
    UNHEALTHY = "Unhealthy"


HEALTHY_MIN = 9.0
PROBLEMATIC_MIN = 5.0


def band_of(value: float) -> Band:
    """Classify a composite score; lower bounds are closed (9.0 is Healthy)."""
    if not (1.0 <= value <= 10.0):
        raise DomainError(f"health value must lie in [1, 10], got {value!r}")
    if value >= HEALTHY_MIN:
        return Band.HEALTHY
    if value >= PROBLEMATIC_MIN:
        return Band.PROBLEMATIC
    return Band.UNHEALTHY


@dataclass(frozen=True)
class HealthScore:
    value: float
    band: Band

    @classmethod
    def of(cls, value: float) -> "HealthScore":
        return cls(value, band_of(value))

    def as_dict(self) -> dict:
        return {"value": self.value, "band": self.band.value}


DEFAULT_WEIGHTS = {
    "cyclomatic_max": 2.0,
    "cyclomatic_mean": 1.0,
    "file_loc": 1.0,
    "function_length_max": 1.0,
    "nesting_depth_max": 1.0,
    "arg_count_max": 0.5,
    "duplication_ratio": 1.5,
    "identifier_shortness": 1.0,
}

DEFAULT_KNEES = {
    "cyclomatic_max": (10.0, 30.0),
    "cyclomatic_mean": (4.0, 10.0),
    "file_loc": (300.0, 1500.0),
    "function_length_max": (50.0, 200.0),
    "nesting_depth_max": (3.0, 7.0),
    "arg_count_max": (4.0, 8.0),
    "duplication_ratio": (0.05, 0.30),
    "identifier_shortness": (0.2, 0.6),
}


@dataclass(frozen=True)
class WeightConfig:
    """Penalty weight and (low, high) ramp knees for every sub-factor.

    The default weights sum to 9 so that a fully saturated vector scores 1.
    """

    weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    knees: dict = field(default_factory=lambda: dict(DEFAULT_KNEES))

    def __post_init__(self):
        for name in SUB_FACTORS:
            if name not in self.weights:
                raise ConfigurationError(f"weight for {name} is missing")
            if name not in self.knees:
                raise ConfigurationError(f"knees for {name} are missing")
            w = self.weights[name]
            if not math.isfinite(w) or w < 0:
                raise ConfigurationError(f"weight for {name} must be non-negative, got {w!r}")
            low, high = self.knees[name]
            if not low < high:
                raise ConfigurationError(f"knees for {name} need low < high, got {(low, high)}")
        extra = (set(self.weights) | set(self.knees)) - set(SUB_FACTORS)
        if extra:
            raise ConfigurationError(f"unknown sub-factors in weight config: {sorted(extra)}")

    @property
    def total_weight(self) -> float:
        return sum(self.weights[name] for name in SUB_FACTORS)

    def as_dict(self) -> dict:
        return {
            "weights": {name: float(self.weights[name]) for name in SUB_FACTORS},
            "knees": {name: [float(k) for k in self.knees[name]] for name in SUB_FACTORS},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WeightConfig":
        return cls(
            weights={k: float(v) for k, v in data["weights"].items()},
            knees={k: (float(v[0]), float(v[1])) for k, v in data["knees"].items()},
        )

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def ramp(x: float, low: float, high: float) -> float:
    """Saturating linear ramp: 0 at or below ``low``, 1 at or above ``high``."""
    return min(1.0, max(0.0, (x - low) / (high - low)))


def penalties(v: SubFactorVector, weights: WeightConfig | None = None) -> dict[str, float]:
    weights = weights or WeightConfig()
    return {name: ramp(getattr(v, name), *weights.knees[name]) for name in SUB_FACTORS}


def composite_score(v: SubFactorVector, weights: WeightConfig | None = None) -> HealthScore:
    weights = weights or WeightConfig()
    ramps = penalties(v, weights)
    total = sum(weights.weights[name] * ramps[name] for name in SUB_FACTORS)
    value = min(10.0, max(1.0, 10.0 - total))
    return HealthScore.of(value)


def dialect_for_path(path: str | PurePath, table: dict | None = None) -> str:
    table = EXTENSION_DIALECTS if table is None else table
    suffix = PurePath(path).suffix.lower()
    try:
        return table[suffix]
    except KeyError:
        raise ConfigurationError(
            f"cannot infer dialect for {str(path)!r}; pass dialect='brace' or 'indent'"
        ) from None


# ---------------------------------------------------------------------------
# string / comment stripping

_PY_PREFIX = re.compile(r"(?<![A-Za-z0-9_])[rRbBuUfF]{1,2}$")


def _strip_brace(src: str) -> str:
    out = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        two = src[i:i + 2]
        if two == "//":
            j = src.find("\n", i)
            i = n if j < 0 else j
        elif two == "/*":
            j = src.find("*/", i + 2)
            end = n if j < 0 else j + 2
            out.append("\n" * src.count("\n", i, end))
            i = end
        elif c in "\"'`":
            j = i + 1
            while j < n and src[j] != c:
                if src[j] == "\\":
                    j += 1
                elif src[j] == "\n" and c != "`":
                    break
                j += 1
            end = min(j + 1, n) if j < n and src[j] == c else j
            out.append('""' + "\n" * src.count("\n", i, end))
            i = end
        else:
            out.append(c)
            i += 1
    return "".join(out)


def _strip_indent(src: str) -> str:
    out: list[str] = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c == "#":
            j = src.find("\n", i)
            i = n if j < 0 else j
        elif c in "\"'":
            # drop a string prefix such as r, b, f, rb already emitted
            tail = "".join(out[-2:])
            m = _PY_PREFIX.search(tail)
            if m:
                del out[len(out) - len(m.group(0)):]
            quote = src[i:i + 3] if src[i:i + 3] in ('"""', "'''") else c
            j = i + len(quote)
            while j < n and not src.startswith(quote, j):
                if src[j] == "\\":
                    j += 1
                elif src[j] == "\n" and len(quote) == 1:
                    break
                j += 1
            end = min(j + len(quote), n) if src.startswith(quote, j) else j
            out.append('""' + "\n" * src.count("\n", i, end))
            i = end
        else:
            out.append(c)
            i += 1
    return "".join(out)


# ---------------------------------------------------------------------------
# tokenization helpers

_TOKEN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|&&|\|\||=>|->|::|\?|[{}()\[\];,:=<>*&.]")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")

BRACE_DECISIONS = {"if", "for", "foreach", "while", "case", "catch", "&&", "||", "?"}
INDENT_DECISIONS = {"if", "elif", "for", "while", "except", "case", "and", "or"}

BRACE_CONTROL = {"if", "for", "foreach", "while", "switch", "catch", "return", "sizeof",
                 "synchronized", "using", "lock", "typeof", "with", "new", "throw"}
BRACE_KEYWORDS = {
    "auto", "break", "case", "catch", "char", "class", "const", "continue", "default",
    "delete", "do", "double", "else", "enum", "export", "extends", "extern", "false",
    "final", "finally", "float", "for", "foreach", "func", "function", "go", "if",
    "impl", "implements", "import", "in", "instanceof", "int", "interface", "let",
    "long", "match", "mut", "namespace", "new", "null", "nullptr", "override",
    "package", "private", "protected", "public", "return", "self", "short", "signed",
    "static", "struct", "super", "switch", "template", "this", "throw", "throws",
    "true", "try", "typedef", "typeof", "union", "unsigned", "use", "using", "var",
    "virtual", "void", "volatile", "while", "yield", "async", "await", "fn", "pub",
    "def", "val", "bool", "boolean", "string", "byte", "type", "const", "undefined",
}
PY_KEYWORDS = set(keyword.kwlist) | {"match", "case", "self", "cls", "_"}

_SIGNATURE_SKIP = {"const", "override", "noexcept", "final", "mutable", "async",
                   "throws", "where", "->", ":", "::", ".", "*", "&", "<", ">", ",",
                   "[", "]", "=>"}


@dataclass
class _Unit:
    start: int
    end: int = -1
    decisions: int = 0
    nesting: int = 0
    args: int = 0
    is_function: bool = True


def _is_ternary(code: str, pos: int) -> bool:
    nxt = code[pos + 1:pos + 2]
    return nxt not in (".", "?", ":", ">", ",", ")", ";", "]", "")


def _code_lines(stripped: str, dialect: str) -> list[str]:
    lines = stripped.split("\n")
    result = []
    for line in lines:
        norm = " ".join(line.split())
        if dialect == "indent" and norm == '""':
            norm = ""
        result.append(norm)
    return result


def _count_args(params: str, dialect: str) -> int:
    depth = 0
    parts, cur = [], []
    for ch in params:
        if ch in "([{<":
            depth += 1
        elif ch in ")]}>":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    count = 0
    for part in parts:
        p = part.strip()
        if not p or p in ("*", "/", "void", "..."):
            continue
        if dialect == "indent" and p.split(":")[0].split("=")[0].strip() in ("self", "cls"):
            continue
        count += 1
    return count


def _scan_brace(stripped: str) -> list[_Unit]:
    tokens = []
    line = 1
    last = 0
    for m in _TOKEN.finditer(stripped):
        line += stripped.count("\n", last, m.start())
        last = m.start()
        tok = m.group(0)
        if tok == "?" and not _is_ternary(stripped, m.start()):
            tok = "?op"
        tokens.append((tok, line, m.start()))

    top = _Unit(start=1, is_function=False)
    units: list[_Unit] = []
    # block stack entries: (kind, unit); kind in function/control/other
    stack: list[tuple[str, _Unit]] = []
    paren_open: list[int] = []
    paren_match: dict[int, int] = {}
    for idx, (tok, _, _) in enumerate(tokens):
        if tok == "(":
            paren_open.append(idx)
        elif tok == ")" and paren_open:
            paren_match[idx] = paren_open.pop()

    def current_unit() -> _Unit:
        for kind, unit in reversed(stack):
            if kind == "function":
                return unit
        return top

    def classify(idx: int) -> tuple[str, _Unit | None]:
        j = idx - 1
        while j >= 0:
            t = tokens[j][0]
            if t == ")":
                break
            if t in _SIGNATURE_SKIP or (_IDENT.fullmatch(t) and t not in BRACE_CONTROL
                                        and t not in ("else", "do", "try", "finally")):
                j -= 1
                continue
            break
        if j < 0:
            return "other", None
        tok = tokens[j][0]
        if tok in ("else", "do", "try", "finally"):
            return "control", None
        if tok != ")" or j not in paren_match:
            return "other", None
        opener = paren_match[j]
        head = tokens[opener - 1][0] if opener > 0 else ""
        if head in BRACE_CONTROL:
            return "control", None
        is_lambda = j + 1 < len(tokens) and tokens[j + 1][0] in ("=>", "->")
        if _IDENT.fullmatch(head) or is_lambda or head == "function":
            params = stripped[tokens[opener][2] + 1:tokens[j][2]]
            unit = _Unit(start=tokens[opener - 1][1] if opener > 0 else tokens[opener][1])
            unit.args = _count_args(params, "brace")
            return "function", unit
        return "other", None

    for idx, (tok, ln, _) in enumerate(tokens):
        if tok == "{":
            kind, unit = classify(idx)
            if kind == "function":
                stack.append((kind, unit))
                units.append(unit)
                continue
            stack.append((kind, current_unit()))
            owner = current_unit()
            depth = 0
            for k, u in reversed(stack):
                if k == "function":
                    break
                if owner.is_function or k == "control":
                    depth += 1
            owner.nesting = max(owner.nesting, depth)
        elif tok == "}":
            if stack:
                kind, unit = stack.pop()
                if kind == "function":
                    unit.end = ln
        elif tok in BRACE_DECISIONS:
            current_unit().decisions += 1
    last_line = stripped.count("\n") + 1
    for unit in units:
        if unit.end < 0:
            unit.end = last_line
    if top.decisions:
        top.end = last_line
        units.append(top)
    return units


def _logical_lines(stripped: str) -> list[tuple[int, int, int, str]]:
    """Join continuation lines; yields (first_line, last_line, indent, text)."""
    result = []
    physical = stripped.split("\n")
    i = 0
    while i < len(physical):
        raw = physical[i]
        if not raw.strip() or raw.strip() == '""':
            i += 1
            continue
        indent = len(raw.expandtabs(8)) - len(raw.expandtabs(8).lstrip())
        parts = [raw.strip()]
        depth = sum(raw.count(c) for c in "([{") - sum(raw.count(c) for c in ")]}")
        j = i
        while (depth > 0 or parts[-1].endswith("\\")) and j + 1 < len(physical):
            j += 1
            nxt = physical[j]
            parts.append(nxt.strip())
            depth += sum(nxt.count(c) for c in "([{") - sum(nxt.count(c) for c in ")]}")
        result.append((i + 1, j + 1, indent, " ".join(p for p in parts if p)))
        i = j + 1
    return result


_DEF = re.compile(r"^(?:async\s+)?def\s+[A-Za-z_][A-Za-z0-9_]*\s*\(")


def _scan_indent(stripped: str) -> list[_Unit]:
    top = _Unit(start=1, is_function=False)
    units: list[_Unit] = []
    stack: list[tuple[int, str, _Unit | None]] = []  # (indent, kind, unit)

    def innermost() -> _Unit:
        for _, kind, unit in reversed(stack):
            if kind == "def":
                return unit
        return top

    last_line = 1
    for first, last, indent, text in _logical_lines(stripped):
        while stack and indent <= stack[-1][0]:
            _, kind, unit = stack.pop()
            if kind == "def":
                unit.end = last_line
        owner = innermost()
        words = _IDENT.findall(text)
        owner_for_tokens = owner
        opens_block = text.endswith(":")
        if _DEF.match(text):
            unit = _Unit(start=first)
            open_at = text.index("(")
            depth, close_at = 0, len(text)
            for pos in range(open_at, len(text)):
                if text[pos] in "([{":
                    depth += 1
                elif text[pos] in ")]}":
                    depth -= 1
                    if depth == 0:
                        close_at = pos
                        break
            unit.args = _count_args(text[open_at + 1:close_at], "indent")
            units.append(unit)
            owner_for_tokens = unit
            if opens_block:
                stack.append((indent, "def", unit))
            else:
                unit.end = last
        elif opens_block:
            head = words[0] if words else ""
            kind = "class" if head == "class" else "control"
            stack.append((indent, kind, None))
            if kind == "control":
                depth = 0
                for _, k, _ in reversed(stack):
                    if k == "def":
                        break
                    if k == "control":
                        depth += 1
                owner.nesting = max(owner.nesting, depth)
        owner_for_tokens.decisions += sum(1 for w in words if w in INDENT_DECISIONS)
        last_line = last
    for _, kind, unit in stack:
        if kind == "def":
            unit.end = last_line
    if top.decisions:
        top.end = last_line
        units.append(top)
    return units


def _duplication(code: list[str]) -> int:
    lines = [ln for ln in code if ln]
    if len(lines) < DUPLICATION_WINDOW:
        return 0
    windows = [hashlib.sha1("\n".join(lines[i:i + DUPLICATION_WINDOW]).encode()).digest()
               for i in range(len(lines) - DUPLICATION_WINDOW + 1)]
    counts = Counter(windows)
    marked = set()
    for i, h in enumerate(windows):
        if counts[h] >= 2:
            marked.update(range(i, i + DUPLICATION_WINDOW))
    return len(marked)


def _decode(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        try:
            source = bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise AnalysisError(f"source is not valid UTF-8: {exc}") from None
    if not isinstance(source, str):
        raise AnalysisError(f"source must be text, got {type(source).__name__}")
    if "\x00" in source:
        raise AnalysisError("source contains NUL bytes; binary input is not analyzable")
    return source


def analyze_file(source: str | bytes, dialect: str) -> SubFactorVector:
    """Measure the eight sub-factors of one source file.

    Cyclomatic complexity per function is one plus the number of decision
    tokens. Code outside any function forms an extra unit only when it
    contains decisions of its own.
    """
    if dialect not in DIALECTS:
        raise ConfigurationError(f"unknown dialect {dialect!r}; expected one of {DIALECTS}")
    text = _decode(source).replace("\r\n", "\n").replace("\r", "\n")
    stripped = _strip_brace(text) if dialect == "brace" else _strip_indent(text)
    code = _code_lines(stripped, dialect)
    loc = sum(1 for ln in code if ln)
    if loc == 0:
        return SubFactorVector()

    units = _scan_brace(stripped) if dialect == "brace" else _scan_indent(stripped)
    complexities = [1 + u.decisions for u in units]
    functions = [u for u in units if u.is_function]
    lengths = [sum(1 for ln in code[u.start - 1:u.end] if ln) for u in functions]

    keywords = BRACE_KEYWORDS if dialect == "brace" else PY_KEYWORDS
    identifiers = {w for w in _IDENT.findall(stripped) if w not in keywords}
    short = sum(1 for w in identifiers if len(w) < SHORT_IDENTIFIER)

    return SubFactorVector(
        cyclomatic_max=float(max(complexities, default=0)),
        cyclomatic_mean=float(sum(complexities) / len(complexities)) if complexities else 0.0,
        file_loc=float(loc),
        function_length_max=float(max(lengths, default=0)),
        nesting_depth_max=float(max((u.nesting for u in units), default=0)),
        arg_count_max=float(max((u.args for u in functions), default=0)),
        duplication_ratio=_duplication(code) / loc,
        identifier_shortness=short / len(identifiers) if identifiers else 0.0,
    )


def analyze_path(path, dialect: str | None = None, weights: WeightConfig | None = None) -> dict:
    """Analyze one file on disk and return a JSON-ready report."""
    dialect = dialect or dialect_for_path(path)
    with open(path, "rb") as fh:
        v = analyze_file(fh.read(), dialect)
    score = composite_score(v, weights)
    return {"path": str(path), "dialect": dialect, "sub_factors": v.as_dict(),
            "score": score.value, "band": score.band.value}
