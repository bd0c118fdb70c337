"""Problem-file format: tokenizer, recursive-descent parser, printer.

A statement starts at one of the section keywords (domain, predicate, weight,
sentence, cardinality, psi, mln) and runs until the next keyword, so formulas
may wrap across lines.  Comments start with '#'.  See docs/grammar.md for the
EBNF.

Operator precedence, loosest to tightest: <-> , -> , | , & , ~.  Quantifier
bodies extend as far right as possible; the printer re-inserts parentheses so
that parse(print(f)) is structurally equal to f.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .logic import (
    Atom,
    And,
    Bottom,
    CardinalityAtom,
    CountExists,
    Equality,
    Exists,
    FALSE,
    Forall,
    Formula,
    Iff,
    Implies,
    Not,
    Or,
    Pred,
    RESERVED_PREFIX,
    Top,
    TRUE,
    Vocabulary,
    WeightMap,
    conjoin,
    is_variable,
)
from .rationals import Rat, rat_from_string

SECTION_KEYWORDS = ("domain", "predicate", "weight", "sentence", "cardinality", "psi", "mln")
RESERVED_WORDS = SECTION_KEYWORDS + ("forall", "exists", "hard", "true", "false", "n")

_SYMBOLS = (
    "<->",
    "->",
    "!=",
    "<=",
    ">=",
    "(",
    ")",
    ",",
    ".",
    "|",
    "&",
    "~",
    "=",
    "<",
    ">",
    "/",
    "*",
    "+",
    "-",
    "[",
    "]",
    ":",
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int) -> None:
        super().__init__(f"line {line}, col {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "number", "end", or the symbol text itself
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isalpha() or ch == "_" or ch == RESERVED_PREFIX:
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            tokens.append(Token("number", text[i:j], line, col))
            col += j - i
            i = j
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token(sym, sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("end", "", line, col))
    return tokens


@dataclass
class MlnDecl:
    """One mln statement: multiplier is None for hard formulas."""

    multiplier: Rat | None
    formula: Formula


@dataclass
class ProblemFile:
    domain_size: int | None
    vocab: Vocabulary
    weights: WeightMap
    sentences: list[Formula]
    cardinality: list[Formula]
    psi: list[str] = field(default_factory=list)
    mln: list[MlnDecl] = field(default_factory=list)

    def sentence(self) -> Formula:
        """All sentence and cardinality statements conjoined."""
        return conjoin(self.sentences + self.cardinality)

    def has_mln(self) -> bool:
        return bool(self.mln)


class _Parser:
    def __init__(self, tokens: list[Token], pred_table: dict[str, Pred] | None = None) -> None:
        self.tokens = tokens
        self.pos = 0
        self.pred_table = pred_table  # None disables declaration checks
        self.allow_card = True

    # -- token plumbing ----------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def fail(self, message: str, tok: Token | None = None) -> ParseError:
        t = tok or self.peek()
        return ParseError(message, t.line, t.col)

    def expect(self, kind: str) -> Token:
        t = self.peek()
        if t.kind != kind:
            found = "end of input" if t.kind == "end" else repr(t.text)
            raise self.fail(f"expected {kind!r}, found {found}")
        return self.next()

    def accept(self, kind: str) -> Token | None:
        if self.peek().kind == kind:
            return self.next()
        return None

    def at_ident(self, word: str) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.text == word

    def expect_ident(self) -> Token:
        t = self.peek()
        if t.kind != "ident":
            found = "end of input" if t.kind == "end" else repr(t.text)
            raise self.fail(f"expected identifier, found {found}")
        return self.next()

    # -- numeric literals --------------------------------------------------

    def parse_integer(self) -> int:
        sign = 1
        if self.accept("-"):
            sign = -1
        t = self.expect("number")
        if "." in t.text:
            raise self.fail("expected an integer", t)
        return sign * int(t.text)

    def parse_unsigned_integer(self) -> int:
        t = self.expect("number")
        if "." in t.text:
            raise self.fail("expected an integer", t)
        return int(t.text)

    def parse_rational(self) -> Rat:
        sign = ""
        if self.accept("-"):
            sign = "-"
        t = self.expect("number")
        text = t.text
        if self.peek().kind == "/":
            if "." in text:
                raise self.fail("fraction numerator must be an integer", t)
            self.next()
            d = self.expect("number")
            if "." in d.text:
                raise self.fail("fraction denominator must be an integer", d)
            if int(d.text) == 0:
                raise self.fail("zero denominator", d)
            text = f"{text}/{d.text}"
        try:
            return rat_from_string(sign + text)
        except ValueError as exc:
            raise self.fail(str(exc), t)

    # -- formulas ----------------------------------------------------------

    def parse_formula(self) -> Formula:
        return self.parse_iff()

    def parse_iff(self) -> Formula:
        left = self.parse_implies()
        while self.accept("<->"):
            left = Iff(left, self.parse_implies())
        return left

    def parse_implies(self) -> Formula:
        left = self.parse_or()
        if self.accept("->"):
            return Implies(left, self.parse_implies())  # right-associative
        return left

    def parse_or(self) -> Formula:
        left = self.parse_and()
        while self.accept("|"):
            left = Or(left, self.parse_and())
        return left

    def parse_and(self) -> Formula:
        left = self.parse_unary()
        while self.accept("&"):
            left = And(left, self.parse_unary())
        return left

    def parse_unary(self) -> Formula:
        if self.accept("~"):
            return Not(self.parse_unary())
        if self.at_ident("forall") or self.at_ident("exists"):
            return self.parse_quantifier()
        return self.parse_primary()

    def parse_quantifier(self) -> Formula:
        t = self.next()
        comparator: str | None = None
        k = 0
        if t.text == "exists" and self.accept("["):
            cmp_tok = self.peek()
            if cmp_tok.kind not in ("=", "<=", ">="):
                raise self.fail("expected =, <= or >= after 'exists['")
            comparator = self.next().kind
            k_tok = self.peek()
            k = self.parse_integer()
            if k < 0:
                raise self.fail("counting parameter must be >= 0", k_tok)
            self.expect("]")
        var_tok = self.expect_ident()
        var = var_tok.text
        if not is_variable(var):
            raise ParseError(f"{var!r} is not a variable", var_tok.line, var_tok.col)
        self.expect(".")
        body = self.parse_formula()
        if t.text == "forall":
            return Forall(var, body)
        if comparator is None:
            return Exists(var, body)
        return CountExists(comparator, k, var, body)

    def parse_primary(self) -> Formula:
        t = self.peek()
        if t.kind == "(":
            self.next()
            f = self.parse_formula()
            self.expect(")")
            return f
        if t.kind == "|":
            return self.parse_cardinality_atom()
        if t.kind == "ident":
            if t.text == "true":
                self.next()
                return TRUE
            if t.text == "false":
                self.next()
                return FALSE
            if t.text in RESERVED_WORDS:
                raise self.fail(f"reserved word {t.text!r} cannot start a formula here")
            return self.parse_atom_or_equality()
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise self.fail(f"expected a formula, found {found}")

    def parse_atom_or_equality(self) -> Formula:
        name_tok = self.expect_ident()
        name = name_tok.text
        nxt = self.peek()
        if nxt.kind in ("=", "!="):
            op = self.next().kind
            right_tok = self.expect_ident()
            eq = Equality(name, right_tok.text)
            return Not(eq) if op == "!=" else eq
        args: tuple[str, ...] = ()
        if nxt.kind == "(":
            self.next()
            collected: list[str] = []
            if self.peek().kind != ")":
                collected.append(self.expect_ident().text)
                while self.accept(","):
                    collected.append(self.expect_ident().text)
            self.expect(")")
            args = tuple(collected)
        if is_variable(name):
            raise ParseError(f"variable {name!r} cannot be used as a predicate", name_tok.line, name_tok.col)
        self.check_pred(name, len(args), name_tok)
        return Atom(name, args)

    def check_pred(self, name: str, arity: int | None, tok: Token) -> None:
        if self.pred_table is None:
            return
        pr = self.pred_table.get(name)
        if pr is None:
            raise ParseError(f"undeclared predicate {name!r}", tok.line, tok.col)
        if arity is not None and pr.arity != arity:
            raise ParseError(
                f"predicate {name}/{pr.arity} used with {arity} arguments", tok.line, tok.col
            )

    def parse_cardinality_atom(self) -> CardinalityAtom:
        bar = self.expect("|")
        if not self.allow_card:
            raise self.fail("cardinality atoms are not allowed here", bar)
        name_tok = self.expect_ident()
        self.expect("|")
        cmp_tok = self.peek()
        if cmp_tok.kind not in ("=", "<=", ">=", "<", ">"):
            raise self.fail("expected a comparison after |pred|")
        comparator = self.next().kind
        coeff, offset = self.parse_affine_bound()
        self.check_pred(name_tok.text, None, name_tok)
        return CardinalityAtom(name_tok.text, comparator, coeff, offset)

    def parse_affine_bound(self) -> tuple[int, int]:
        """coeff*n + offset; accepted shapes: c | n | k*n, each with [± c]."""
        coeff = 0
        offset = 0
        if self.at_ident("n"):
            self.next()
            coeff = 1
        else:
            value = self.parse_integer()
            if self.accept("*"):
                t = self.expect_ident()
                if t.text != "n":
                    raise ParseError("expected 'n' after '*'", t.line, t.col)
                coeff = value
            else:
                offset = value
        if coeff != 0:
            if self.accept("+"):
                offset = self.parse_unsigned_integer()
            elif self.accept("-"):
                offset = -self.parse_unsigned_integer()
        return coeff, offset


def parse_formula_text(text: str, vocab: Vocabulary | None = None) -> Formula:
    """Parse a standalone formula; declaration checks only if vocab given."""
    table = vocab.by_name() if vocab is not None else None
    p = _Parser(tokenize(text), table)
    f = p.parse_formula()
    tail = p.peek()
    if tail.kind != "end":
        raise ParseError(f"unexpected trailing input {tail.text!r}", tail.line, tail.col)
    return f


def parse_problem(text: str) -> ProblemFile:
    pred_names: dict[str, Pred] = {}
    p = _Parser(tokenize(text), pred_names)

    domain_size: int | None = None
    domain_seen = False
    preds: list[Pred] = []
    weights = WeightMap()
    sentences: list[Formula] = []
    cardinality: list[Formula] = []
    psi: list[str] = []
    mln: list[MlnDecl] = []

    while p.peek().kind != "end":
        t = p.peek()
        if t.kind != "ident" or t.text not in SECTION_KEYWORDS:
            found = "end of input" if t.kind == "end" else repr(t.text)
            raise p.fail(f"expected a section keyword, found {found}")
        keyword = p.next().text

        if keyword == "domain":
            if domain_seen:
                raise p.fail("duplicate domain declaration", t)
            domain_seen = True
            if p.at_ident("n"):
                p.next()
                domain_size = None
            else:
                size_tok = p.peek()
                domain_size = p.parse_integer()
                if domain_size <= 0:
                    raise ParseError("domain size must be positive", size_tok.line, size_tok.col)

        elif keyword == "predicate":
            while True:
                name_tok = p.expect_ident()
                name = name_tok.text
                if name.startswith(RESERVED_PREFIX):
                    raise ParseError(f"reserved predicate name {name!r}", name_tok.line, name_tok.col)
                if name in RESERVED_WORDS:
                    raise ParseError(f"reserved word {name!r} cannot name a predicate", name_tok.line, name_tok.col)
                if is_variable(name):
                    raise ParseError(f"variable letter {name!r} cannot name a predicate", name_tok.line, name_tok.col)
                if name in pred_names:
                    raise ParseError(f"duplicate predicate {name!r}", name_tok.line, name_tok.col)
                p.expect("/")
                arity_tok = p.peek()
                arity = p.parse_integer()
                if arity not in (0, 1, 2):
                    raise ParseError("arity must be 0, 1 or 2", arity_tok.line, arity_tok.col)
                pr = Pred(name, arity)
                preds.append(pr)
                pred_names[name] = pr
                if not p.accept(","):
                    break

        elif keyword == "weight":
            name_tok = p.expect_ident()
            p.check_pred(name_tok.text, None, name_tok)
            w = p.parse_rational()
            if p.peek().kind in ("number", "-"):
                wb = p.parse_rational()
            else:
                wb = rat_from_string("1")
            weights = weights.with_weight(name_tok.text, w, wb)

        elif keyword == "sentence":
            sentences.append(p.parse_formula())

        elif keyword == "cardinality":
            cardinality.append(p.parse_formula())

        elif keyword == "psi":
            while True:
                name_tok = p.expect_ident()
                p.check_pred(name_tok.text, None, name_tok)
                if name_tok.text in psi:
                    raise ParseError(f"duplicate psi predicate {name_tok.text!r}", name_tok.line, name_tok.col)
                psi.append(name_tok.text)
                if not p.accept(","):
                    break

        elif keyword == "mln":
            if p.at_ident("hard"):
                p.next()
                multiplier: Rat | None = None
            else:
                mult_tok = p.peek()
                multiplier = p.parse_rational()
                if multiplier <= 0:
                    raise ParseError("mln multiplier must be positive", mult_tok.line, mult_tok.col)
            p.expect(":")
            p.allow_card = False
            try:
                f = p.parse_formula()
            finally:
                p.allow_card = True
            mln.append(MlnDecl(multiplier, f))

    vocab = Vocabulary(tuple(preds))
    return ProblemFile(
        domain_size=domain_size,
        vocab=vocab,
        weights=weights,
        sentences=sentences,
        cardinality=cardinality,
        psi=psi,
        mln=mln,
    )


# -- printing ---------------------------------------------------------------

_ATOMIC = 6


def _prec(f: Formula) -> int:
    if isinstance(f, Iff):
        return 1
    if isinstance(f, Implies):
        return 2
    if isinstance(f, Or):
        return 3
    if isinstance(f, And):
        return 4
    if isinstance(f, Not):
        return 5 if not isinstance(f.sub, Equality) else _ATOMIC  # "a != b"
    if isinstance(f, (Forall, Exists, CountExists)):
        return 0  # maximal right scope; parenthesized unless rightmost
    return _ATOMIC


def _bound_text(coeff: int, offset: int) -> str:
    if coeff == 0:
        return str(offset)
    head = "n" if coeff == 1 else f"{coeff}*n"
    if offset > 0:
        return f"{head} + {offset}"
    if offset < 0:
        return f"{head} - {-offset}"
    return head


def print_formula(f: Formula) -> str:
    return _print(f, open_right=True)


def _print(f: Formula, open_right: bool) -> str:
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bottom):
        return "false"
    if isinstance(f, Atom):
        return f.pred if not f.args else f"{f.pred}({', '.join(f.args)})"
    if isinstance(f, Equality):
        return f"{f.left} = {f.right}"
    if isinstance(f, CardinalityAtom):
        return f"|{f.pred}| {f.comparator} {_bound_text(f.coeff, f.offset)}"
    if isinstance(f, Not):
        if isinstance(f.sub, Equality):
            return f"{f.sub.left} != {f.sub.right}"
        return "~" + _wrap(f.sub, 5, open_right, strict=False)
    if isinstance(f, And):
        return f"{_wrap(f.left, 4, False, strict=False)} & {_wrap(f.right, 4, open_right, strict=True)}"
    if isinstance(f, Or):
        return f"{_wrap(f.left, 3, False, strict=False)} | {_wrap(f.right, 3, open_right, strict=True)}"
    if isinstance(f, Implies):
        return f"{_wrap(f.left, 2, False, strict=True)} -> {_wrap(f.right, 2, open_right, strict=False)}"
    if isinstance(f, Iff):
        return f"{_wrap(f.left, 1, False, strict=False)} <-> {_wrap(f.right, 1, open_right, strict=True)}"
    if isinstance(f, Forall):
        return f"forall {f.var}. {_print(f.body, True)}"
    if isinstance(f, Exists):
        return f"exists {f.var}. {_print(f.body, True)}"
    if isinstance(f, CountExists):
        return f"exists[{f.comparator}{f.k}] {f.var}. {_print(f.body, True)}"
    raise TypeError(f"cannot print {type(f).__name__}")


def _wrap(c: Formula, parent_prec: int, open_right: bool, strict: bool) -> str:
    cp = _prec(c)
    if cp == 0:  # quantifier: bare only when everything to its right is its body
        if open_right:
            return _print(c, True)
        return f"({_print(c, True)})"
    if cp < parent_prec or (strict and cp == parent_prec):
        return f"({_print(c, True)})"
    return _print(c, open_right)
