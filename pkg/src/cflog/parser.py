"""Concrete syntax: a line-oriented ProbLog subset with query directives.

::

    0.3::smokes.                      % probabilistic fact
    r(s).                             % deterministic fact (probability 1)
    cancer :- smokes, \\+ healthy.     % clause
    0.1::trap(y) :- p(x,y).           % probabilistic clause (desugared)
    0.5::h1; 0.3::h2 :- body.         % annotated disjunction (desugared)
    query(cancer).  evidence(a, true).  fix(b, false).  do(b, false).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import CycleError, ParseError, ValidationError
from .lpad import LPADClause, desugar
from .program import Clause, Literal, ProbFact, Program, check_acyclic, format_prob

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>%[^\n]*)
  | (?P<number>\d+/\d+|\d+\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)
  | (?P<ident>[a-z][A-Za-z0-9_]*)
  | (?P<op>::|:-|\\\+|[(),;.])
    """,
    re.VERBOSE,
)

DIRECTIVES = ("query", "evidence", "fix", "do")


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


@dataclass
class ParsedFile:
    program: Program
    queries: list[str] = field(default_factory=list)
    evidence: dict[str, bool] = field(default_factory=dict)
    fix: dict[str, bool] = field(default_factory=dict)
    do: dict[str, bool] = field(default_factory=dict)


class _Parser:
    def __init__(self, text: str, exact: bool):
        self.tokens = tokenize(text)
        self.i = 0
        self.exact = exact

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def take(self, kind=None, text=None) -> Token:
        tok = self.tok
        if (kind and tok.kind != kind) or (text and tok.text != text):
            want = text or kind
            raise self.error(f"expected {want!r}, found {tok.text or 'end of input'!r}")
        self.i += 1
        return tok

    def at(self, text) -> bool:
        return self.tok.text == text and self.tok.kind == "op"

    def number(self):
        tok = self.take("number")
        if "/" in tok.text:
            num, den = tok.text.split("/")
            if int(den) == 0:
                raise self.error("zero denominator", tok)
            value = Fraction(int(num), int(den))
            return value if self.exact else float(value)
        return Fraction(tok.text) if self.exact else float(tok.text)

    def atom(self) -> str:
        name = self.take("ident").text
        if self.at("("):
            self.take(text="(")
            args = [self.take("ident").text]
            while self.at(","):
                self.take(text=",")
                args.append(self.take("ident").text)
            self.take(text=")")
            name += "(" + ",".join(args) + ")"
        return name

    def literal(self) -> Literal:
        if self.at("\\+"):
            self.take(text="\\+")
            return Literal(self.atom(), False)
        return Literal(self.atom(), True)

    def head(self):
        tok = self.tok
        prob = None
        if tok.kind == "number":
            prob = self.number()
            self.take(text="::")
        return prob, self.atom(), tok

    def statement(self):
        start = self.tok
        if start.kind == "ident" and start.text in DIRECTIVES and self.tokens[self.i + 1].text == "(":
            return self.directive()
        heads = [self.head()]
        while self.at(";"):
            self.take(text=";")
            heads.append(self.head())
        body: list[Literal] = []
        if self.at(":-"):
            self.take(text=":-")
            body.append(self.literal())
            while self.at(","):
                self.take(text=",")
                body.append(self.literal())
        self.take(text=".")
        return ("rule", heads, tuple(body), start)

    def directive(self):
        start = self.take("ident")
        self.take(text="(")
        atom = self.atom()
        value = None
        if start.text == "query":
            self.take(text=")")
        else:
            self.take(text=",")
            tok = self.take("ident")
            if tok.text not in ("true", "false"):
                raise self.error("expected true or false", tok)
            value = tok.text == "true"
            self.take(text=")")
        self.take(text=".")
        return ("directive", start.text, atom, value, start)


def parse_source(text: str, *, exact: bool = False, implicit_false: bool = False) -> ParsedFile:
    """Parse a program file including its directives.

    ``exact`` reads every probability as a Fraction; otherwise ``a/b``
    literals become floats too. ``implicit_false`` declares body-only atoms
    as probability-0 facts instead of rejecting them.
    """
    parser = _Parser(text, exact)
    # items keep source order; ADs are desugared in place
    items: list[tuple[str, object]] = []
    ads: list[LPADClause] = []
    parsed = ParsedFile(Program())
    directives = []
    while parser.tok.kind != "eof":
        stmt = parser.statement()
        if stmt[0] == "directive":
            directives.append(stmt)
            continue
        _, heads, body, tok = stmt
        try:
            if len(heads) == 1 and not body:
                prob, atom, _ = heads[0]
                if prob is None:
                    prob = Fraction(1) if exact else 1.0
                items.append(("fact", ProbFact(atom, prob)))
            elif len(heads) == 1 and heads[0][0] is None:
                items.append(("clause", Clause(heads[0][1], body)))
            else:
                if any(p is None for p, _, _ in heads):
                    raise ParseError("every head of an annotated disjunction needs a probability", tok.line, tok.col)
                ads.append(LPADClause(tuple((a, p) for p, a, _ in heads), body))
                items.append(("ad", len(ads) - 1))
        except ValidationError as exc:
            raise ParseError(str(exc), tok.line, tok.col) from None

    user_atoms = set()
    for kind, item in items:
        if kind == "fact":
            user_atoms.add(item.atom)
        elif kind == "clause":
            user_atoms.add(item.head)
            user_atoms.update(l.atom for l in item.body)
    for ad in ads:
        user_atoms.update(h for h, _ in ad.heads)
        user_atoms.update(l.atom for l in ad.body)

    facts: list[ProbFact] = []
    clauses: list[Clause] = []
    for kind, item in items:
        if kind == "fact":
            facts.append(item)
        elif kind == "clause":
            clauses.append(item)
        else:
            fs, cs = desugar([ads[item]], item + 1, user_atoms)
            facts += fs
            clauses += cs

    defined = {f.atom for f in facts} | {c.head for c in clauses}
    undefined = [a for a in dict.fromkeys(l.atom for c in clauses for l in c.body) if a not in defined]
    if undefined:
        if not implicit_false:
            raise ValidationError(
                f"atom {undefined[0]} is never defined (declare it or use implicit-false mode)"
            )
        zero = Fraction(0) if exact else 0.0
        facts += [ProbFact(a, zero) for a in undefined]

    seen = set()
    for f in facts:
        if f.atom in seen:
            raise ValidationError(f"duplicate probabilistic fact for {f.atom}")
        seen.add(f.atom)
    program = Program(tuple(facts), tuple(clauses))
    cycle = check_acyclic(program)
    if cycle:
        raise CycleError(cycle)

    parsed.program = program
    atoms = set(program.atoms)
    for _, kind, atom, value, tok in directives:
        if atom not in atoms:
            raise ParseError(f"directive mentions unknown atom {atom}", tok.line, tok.col)
        if kind == "query":
            parsed.queries.append(atom)
        else:
            getattr(parsed, kind)[atom] = value
    return parsed


def parse_program(text: str, *, exact: bool = False, implicit_false: bool = False) -> Program:
    return parse_source(text, exact=exact, implicit_false=implicit_false).program


def print_program(p: Program) -> str:
    lines = [f"{format_prob(f.prob)}::{f.atom}." for f in p.facts]
    for head, body in p.clauses:
        lines.append(f"{head} :- {', '.join(str(l) for l in body)}.")
    return "\n".join(lines) + ("\n" if lines else "")


def print_directives(queries=(), evidence=None, fix=None, do=None) -> str:
    lines = [f"query({q})." for q in queries]
    for name, mapping in (("evidence", evidence), ("fix", fix), ("do", do)):
        for atom, value in (mapping or {}).items():
            lines.append(f"{name}({atom}, {'true' if value else 'false'}).")
    return "\n".join(lines) + ("\n" if lines else "")
