"""The rule set text format.

Line-oriented, hand-writable, diffable. Two statement forms:

    SNIPPET cafe_offer TITLE "Free coffee" HTML <<<
    <p>deal!</p>
    >>>
    RULE cafe_rule PRIORITY 10 IF visible(ssid:"Cafe") THEN SHOW cafe_offer

`#` starts a line comment. Boolean operators are NOT > AND > OR with
parentheses; atoms are visible(sel), rssi(sel) >= n, and time(HH:MM, HH:MM).
Selectors are ssid:"..." or mac:"...". HTML payloads sit between `<<<` and
`>>>` fences; one newline right after the opener and one right before the
closer are separators, not payload, so block form carries exact content.
A fence may be lengthened (`<<<<` closed by `>>>>`) when the payload itself
contains a `>>>` run. Short payloads also work inline: `HTML <<<hi>>>`.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fingerprint import NetworkSelector
from .rules import (
    RESERVED_WORDS,
    And,
    CmpOp,
    Not,
    Or,
    Predicate,
    RssiCmp,
    Rule,
    RuleSet,
    Snippet,
    TimeIn,
    ValidationError,
    Visible,
)

KEYWORDS = RESERVED_WORDS

# Parser recursion guard; the model itself caps predicate depth at 32, this
# only keeps pathological inputs from blowing the stack first.
MAX_NESTING = 100


class ParseError(ValueError):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message


@dataclass(frozen=True)
class Token:
    kind: str  # WORD, STRING, INT, TIME, HEREDOC, PUNCT, EOF
    value: object
    line: int
    column: int


_PUNCT = (">=", "<=", ">", "<", "(", ")", ":", ",")
_HEX = "0123456789abcdefABCDEF"


def _is_word_start(c: str) -> bool:
    return c.isascii() and (c.isalpha() or c == "_")


def _is_word_char(c: str) -> bool:
    return c.isascii() and (c.isalnum() or c == "_")


class _Lexer:
    def __init__(self, source: str):
        self.src = source
        self.pos = 0
        self.line = 1
        self.col = 1

    def error(self, message: str, line: int | None = None, col: int | None = None):
        raise ParseError(line or self.line, col or self.col, message)

    def _advance(self, n: int = 1):
        for _ in range(n):
            if self.pos < len(self.src):
                if self.src[self.pos] == "\n":
                    self.line += 1
                    self.col = 1
                else:
                    self.col += 1
                self.pos += 1

    def tokens(self) -> list[Token]:
        out = []
        while True:
            tok = self._next()
            out.append(tok)
            if tok.kind == "EOF":
                return out

    def _next(self) -> Token:
        src = self.src
        while self.pos < len(src):
            c = src[self.pos]
            if c in " \t\r\n":
                self._advance()
            elif c == "#":
                while self.pos < len(src) and src[self.pos] != "\n":
                    self._advance()
            else:
                break
        if self.pos >= len(self.src):
            return Token("EOF", None, self.line, self.col)

        line, col = self.line, self.col
        c = self.src[self.pos]

        if c == "<" and self.src[self.pos : self.pos + 3] == "<<<":
            return self._heredoc(line, col)
        for punct in _PUNCT:
            if self.src.startswith(punct, self.pos):
                self._advance(len(punct))
                return Token("PUNCT", punct, line, col)
        if c == '"':
            return self._string(line, col)
        if c.isdigit() or (c == "-" and self.pos + 1 < len(self.src) and self.src[self.pos + 1].isdigit()):
            return self._number(line, col)
        if _is_word_start(c):
            start = self.pos
            while self.pos < len(self.src) and _is_word_char(self.src[self.pos]):
                self._advance()
            return Token("WORD", self.src[start : self.pos], line, col)
        self.error(f"unexpected character {c!r}")

    def _heredoc(self, line: int, col: int) -> Token:
        src = self.src
        fence = 0
        while self.pos < len(src) and src[self.pos] == "<":
            fence += 1
            self._advance()
        if self.pos < len(src) and src[self.pos] == "\n":
            self._advance()
        start = self.pos
        i = start
        while i < len(src):
            if src[i] == ">" and src[i : i + fence] == ">" * fence and src[i + fence : i + fence + 1] != ">":
                content = src[start:i]
                if content.endswith("\n"):
                    content = content[:-1]
                self._advance(i - self.pos + fence)
                return Token("HEREDOC", content, line, col)
            i += 1
        self.error("unterminated HTML payload", line, col)

    def _string(self, line: int, col: int) -> Token:
        self._advance()  # opening quote
        out = []
        src = self.src
        while True:
            if self.pos >= len(src) or src[self.pos] == "\n":
                self.error("unterminated string", line, col)
            c = src[self.pos]
            if c == '"':
                self._advance()
                return Token("STRING", "".join(out), line, col)
            if c == "\\":
                self._advance()
                if self.pos >= len(src):
                    self.error("unterminated string", line, col)
                esc = src[self.pos]
                if esc == "u":
                    hexpart = src[self.pos + 1 : self.pos + 5]
                    if len(hexpart) != 4 or not all(h in _HEX for h in hexpart):
                        self.error("bad \\u escape")
                    out.append(chr(int(hexpart, 16)))
                    self._advance(5)
                elif esc in ('"', "\\", "n", "r", "t"):
                    out.append({'"': '"', "\\": "\\", "n": "\n", "r": "\r", "t": "\t"}[esc])
                    self._advance()
                else:
                    self.error(f"unknown escape \\{esc}")
            else:
                out.append(c)
                self._advance()

    def _number(self, line: int, col: int) -> Token:
        start = self.pos
        if self.src[self.pos] == "-":
            self._advance()
        while self.pos < len(self.src) and self.src[self.pos].isdigit():
            self._advance()
        text = self.src[start : self.pos]
        # HH:MM time literal
        if (
            not text.startswith("-")
            and len(text) <= 2
            and self.src[self.pos : self.pos + 1] == ":"
            and self.src[self.pos + 1 : self.pos + 2].isdigit()
        ):
            self._advance()
            mstart = self.pos
            while self.pos < len(self.src) and self.src[self.pos].isdigit():
                self._advance()
            minutes_text = self.src[mstart : self.pos]
            if len(minutes_text) != 2:
                self.error("time must be HH:MM", line, col)
            hours, minutes = int(text), int(minutes_text)
            if hours > 23 or minutes > 59:
                raise ValidationError(f"{line}:{col}: time of day {text}:{minutes_text} out of range")
            return Token("TIME", hours * 60 + minutes, line, col)
        return Token("INT", int(text), line, col)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.nesting = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(tok.line, tok.column, message)

    def expect_word(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind != "WORD" or tok.value != word:
            self.error(f"expected {word}")
        return self.advance()

    def expect_punct(self, punct: str) -> Token:
        tok = self.peek()
        if tok.kind != "PUNCT" or tok.value != punct:
            self.error(f"expected {punct!r}")
        return self.advance()

    def expect_ident(self, what: str) -> str:
        tok = self.peek()
        if tok.kind != "WORD":
            self.error(f"expected {what} identifier")
        if tok.value in KEYWORDS:
            self.error(f"{tok.value} is a reserved word")
        self.advance()
        return tok.value

    def parse_file(self) -> tuple[dict[str, Snippet], list[Rule]]:
        snippets: dict[str, Snippet] = {}
        rules: list[Rule] = []
        while True:
            tok = self.peek()
            if tok.kind == "EOF":
                return snippets, rules
            if tok.kind == "WORD" and tok.value == "SNIPPET":
                snippet = self.parse_snippet()
                if snippet.id in snippets:
                    raise ValidationError(f"duplicate snippet id {snippet.id!r}")
                snippets[snippet.id] = snippet
            elif tok.kind == "WORD" and tok.value == "RULE":
                rules.append(self.parse_rule())
            else:
                self.error("expected SNIPPET or RULE")

    def parse_snippet(self) -> Snippet:
        self.expect_word("SNIPPET")
        ident = self.expect_ident("snippet")
        self.expect_word("TITLE")
        title_tok = self.peek()
        if title_tok.kind != "STRING":
            self.error("expected snippet title string")
        self.advance()
        self.expect_word("HTML")
        html_tok = self.peek()
        if html_tok.kind != "HEREDOC":
            self.error("expected <<< HTML payload >>>")
        self.advance()
        return Snippet(id=ident, title=title_tok.value, html=html_tok.value)

    def parse_rule(self) -> Rule:
        self.expect_word("RULE")
        ident = self.expect_ident("rule")
        priority = 0
        if self.peek().kind == "WORD" and self.peek().value == "PRIORITY":
            self.advance()
            tok = self.peek()
            if tok.kind != "INT":
                self.error("expected priority integer")
            priority = tok.value
            self.advance()
        self.expect_word("IF")
        condition = self.parse_or()
        self.expect_word("THEN")
        self.expect_word("SHOW")
        snippet_id = self.expect_ident("snippet")
        return Rule(id=ident, condition=condition, snippet_id=snippet_id, priority=priority)

    def parse_or(self) -> Predicate:
        left = self.parse_and()
        while self.peek().kind == "WORD" and self.peek().value == "OR":
            self.advance()
            left = Or(left, self.parse_and())
        return left

    def parse_and(self) -> Predicate:
        left = self.parse_unary()
        while self.peek().kind == "WORD" and self.peek().value == "AND":
            self.advance()
            left = And(left, self.parse_unary())
        return left

    def parse_unary(self) -> Predicate:
        self.nesting += 1
        if self.nesting > MAX_NESTING:
            raise ValidationError("condition too deeply nested")
        try:
            tok = self.peek()
            if tok.kind == "WORD" and tok.value == "NOT":
                self.advance()
                return Not(self.parse_unary())
            return self.parse_atom()
        finally:
            self.nesting -= 1

    def parse_atom(self) -> Predicate:
        tok = self.peek()
        if tok.kind == "PUNCT" and tok.value == "(":
            self.advance()
            inner = self.parse_or()
            self.expect_punct(")")
            return inner
        if tok.kind == "WORD" and tok.value == "visible":
            self.advance()
            self.expect_punct("(")
            sel = self.parse_selector()
            self.expect_punct(")")
            return Visible(sel)
        if tok.kind == "WORD" and tok.value == "rssi":
            self.advance()
            self.expect_punct("(")
            sel = self.parse_selector()
            self.expect_punct(")")
            op_tok = self.peek()
            if op_tok.kind != "PUNCT" or op_tok.value not in (">=", ">", "<=", "<"):
                self.error("expected comparison operator")
            self.advance()
            thr_tok = self.peek()
            if thr_tok.kind != "INT":
                self.error("expected RSSI threshold integer")
            self.advance()
            return RssiCmp(sel=sel, op=CmpOp(op_tok.value), threshold=thr_tok.value)
        if tok.kind == "WORD" and tok.value == "time":
            self.advance()
            self.expect_punct("(")
            start = self.parse_time()
            self.expect_punct(",")
            end = self.parse_time()
            self.expect_punct(")")
            return TimeIn(start=start, end=end)
        self.error("expected condition")

    def parse_time(self) -> int:
        tok = self.peek()
        if tok.kind != "TIME":
            self.error("expected HH:MM time")
        self.advance()
        return tok.value

    def parse_selector(self) -> NetworkSelector:
        tok = self.peek()
        if tok.kind != "WORD" or tok.value not in ("ssid", "mac"):
            self.error("expected ssid: or mac: selector")
        self.advance()
        self.expect_punct(":")
        val_tok = self.peek()
        if val_tok.kind != "STRING":
            self.error("expected quoted selector value")
        self.advance()
        try:
            if tok.value == "ssid":
                return NetworkSelector.by_ssid(val_tok.value)
            return NetworkSelector.by_mac(val_tok.value)
        except ValueError as exc:
            self.error(str(exc), val_tok)


def parse_ruleset(source: str) -> RuleSet:
    """Parse DSL text into a validated rule set.

    Raises ParseError with position on syntax violations, ValidationError
    on duplicate ids, unknown snippet references, out-of-range values, or
    over-deep conditions.
    """
    tokens = _Lexer(source).tokens()
    snippets, rules = _Parser(tokens).parse_file()
    return RuleSet(snippets=snippets, rules=tuple(rules))


# --- serialization -------------------------------------------------------


def _escape_string(text: str) -> str:
    out = []
    for c in text:
        if c == "\\":
            out.append("\\\\")
        elif c == '"':
            out.append('\\"')
        elif c == "\n":
            out.append("\\n")
        elif c == "\r":
            out.append("\\r")
        elif c == "\t":
            out.append("\\t")
        elif ord(c) < 0x20:
            out.append(f"\\u{ord(c):04x}")
        else:
            out.append(c)
    return '"' + "".join(out) + '"'


def _format_selector(sel: NetworkSelector) -> str:
    if sel.mac is not None:
        return f"mac:{_escape_string(sel.mac)}"
    return f"ssid:{_escape_string(sel.ssid)}"


def _format_time(minutes: int) -> str:
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


_PREC = {Or: 1, And: 2}


def _format_predicate(p: Predicate, parent_prec: int = 0, right_child: bool = False) -> str:
    if isinstance(p, Visible):
        return f"visible({_format_selector(p.sel)})"
    if isinstance(p, RssiCmp):
        return f"rssi({_format_selector(p.sel)}) {p.op.value} {p.threshold}"
    if isinstance(p, TimeIn):
        return f"time({_format_time(p.start)}, {_format_time(p.end)})"
    if isinstance(p, Not):
        inner = _format_predicate(p.p, parent_prec=3)
        return f"NOT {inner}"
    prec = _PREC[type(p)]
    word = "AND" if isinstance(p, And) else "OR"
    text = (
        f"{_format_predicate(p.p, parent_prec=prec)} {word} "
        f"{_format_predicate(p.q, parent_prec=prec, right_child=True)}"
    )
    # Parenthesize when binding would change on reparse: lower-precedence
    # children always, same-precedence right children (operators fold left).
    if prec < parent_prec or (prec == parent_prec and right_child):
        return f"({text})"
    return text


def _format_heredoc(html: str) -> str:
    longest = 0
    run = 0
    for c in html:
        run = run + 1 if c == ">" else 0
        longest = max(longest, run)
    fence = max(3, longest + 1)
    return "<" * fence + "\n" + html + "\n" + ">" * fence


def serialize_ruleset(rs: RuleSet) -> str:
    """Render a rule set back to DSL text; reparsing yields an equal set."""
    lines = []
    for snippet in rs.snippets.values():
        lines.append(
            f"SNIPPET {snippet.id} TITLE {_escape_string(snippet.title)} "
            f"HTML {_format_heredoc(snippet.html)}"
        )
    for rule in rs.rules:
        priority = f" PRIORITY {rule.priority}" if rule.priority != 0 else ""
        lines.append(
            f"RULE {rule.id}{priority} IF {_format_predicate(rule.condition)} "
            f"THEN SHOW {rule.snippet_id}"
        )
    return "\n".join(lines) + ("\n" if lines else "")
