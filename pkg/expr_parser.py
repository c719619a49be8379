#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
封闭函数族的表达式小语言

语法（EBNF）:
    expr    := term (("+"|"-") term)* ;
    term    := factor ("*" factor)* ;
    factor  := "-"? atom ("^" uint)? ;
    atom    := number | "i" | "z" | "zbar" | "exp" "(" expr ")" | "(" expr ")" ;
    number  := 十进制数，可带指数，可带后缀 "i" ;

exp 的参数必须化简为 c0 + c1·z + c2·zbar（系数为常数），
c0 并入系数，频率 α = c1/i，β = c2/i。错误位置为 UTF-8 字节偏移。
括号与 exp( 合计最多嵌套 MAX_NESTING_DEPTH 层。
"""

import cmath
import logging
import math
import re
from typing import List, NamedTuple, Optional, Union

from term_algebra import (
    MAX_DEGREE,
    Z,
    ZBAR,
    DegreeBoundError,
    StarExpr,
    Term,
    canonicalize,
    coefficient_of,
    constant,
    constant_value,
    exponential,
    is_affine,
    is_constant,
    mul,
    neg,
    power,
)

logger = logging.getLogger(__name__)

MAX_SOURCE_BYTES = 64 * 1024
# 括号与 exp( 的最大嵌套层数
MAX_NESTING_DEPTH = 100

_NUMBER = re.compile(rb"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?i?")
_IDENT = re.compile(rb"[A-Za-z_][A-Za-z_0-9]*")
_WHITESPACE = b" \t\r\n"
_PUNCT = {
    ord("+"): "PLUS",
    ord("-"): "MINUS",
    ord("*"): "STAR",
    ord("^"): "CARET",
    ord("("): "LPAREN",
    ord(")"): "RPAREN",
}
_KEYWORDS = {"i", "z", "zbar", "exp"}


class ParseError(ValueError):
    """语法错误，position 为字节偏移"""

    def __init__(self, position: int, expected: str, found: str, message: Optional[str] = None):
        self.position = position
        self.expected = expected
        self.found = found
        super().__init__(message or f"第 {position} 字节处: 期望 {expected}，实际为 {found}")


class FamilyViolationError(ParseError):
    """exp 的参数不是 z、zbar 的仿射函数"""


class PowerOverflowError(ParseError):
    """幂次或总次数超过上限"""


class Token(NamedTuple):
    kind: str
    text: str
    pos: int

    def describe(self) -> str:
        return "输入结束" if self.kind == "EOF" else f"'{self.text}'"


def tokenize(data: bytes) -> List[Token]:
    """一次扫描完成词法分析；非法字符在其字节偏移处报错"""
    tokens = []
    pos = 0
    size = len(data)
    while pos < size:
        byte = data[pos]
        if byte in _WHITESPACE:
            pos += 1
            continue
        if byte in _PUNCT:
            tokens.append(Token(_PUNCT[byte], chr(byte), pos))
            pos += 1
            continue
        kind = "NUMBER"
        match = _NUMBER.match(data, pos)
        if match is None:
            kind = "IDENT"
            match = _IDENT.match(data, pos)
        if match is None:
            found = data[pos:pos + 1].decode("latin-1") if byte < 0x80 else f"字节 0x{byte:02x}"
            raise ParseError(pos, "数字、标识符或运算符", repr(found) if byte < 0x80 else found)
        tokens.append(Token(kind, match.group().decode("ascii"), pos))
        pos = match.end()
    tokens.append(Token("EOF", "", size))
    return tokens


class Parser:
    """单 token 前瞻的递归下降解析器"""

    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.index = 0
        self.depth = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        token = self.current
        if token.kind != "EOF":
            self.index += 1
        return token

    def enter(self, token: Token) -> None:
        self.depth += 1
        if self.depth > MAX_NESTING_DEPTH:
            raise ParseError(token.pos, f"嵌套深度不超过 {MAX_NESTING_DEPTH}", token.describe())

    def leave(self) -> None:
        self.depth -= 1

    def expect(self, kind: str, description: str) -> Token:
        if self.current.kind != kind:
            raise ParseError(self.current.pos, description, self.current.describe())
        return self.advance()

    def parse(self) -> StarExpr:
        result = self.expr()
        if self.current.kind != "EOF":
            raise ParseError(self.current.pos, "'+'、'-'、'*'、'^' 或输入结束", self.current.describe())
        return result

    def expr(self) -> StarExpr:
        # 各加项的原始项先收集，最后只规范化一次
        raw = list(self.term().terms)
        while self.current.kind in ("PLUS", "MINUS"):
            operator = self.advance()
            right = self.term()
            raw.extend(right.terms if operator.kind == "PLUS" else neg(right).terms)
        return canonicalize(raw)

    def term(self) -> StarExpr:
        result = self.factor()
        while self.current.kind == "STAR":
            self.advance()
            start = self.current.pos
            right = self.factor()
            try:
                result = mul(result, right)
            except DegreeBoundError as e:
                raise PowerOverflowError(start, f"总次数不超过 {MAX_DEGREE}", f"总次数 {e.degree}") from None
        return result

    def factor(self) -> StarExpr:
        negate = False
        if self.current.kind == "MINUS":
            self.advance()
            negate = True
        start = self.current.pos
        result = self.atom()
        if self.current.kind == "CARET":
            self.advance()
            token = self.current
            if token.kind != "NUMBER" or not token.text.isdigit():
                raise ParseError(token.pos, "非负整数指数", token.describe())
            self.advance()
            exponent = int(token.text)
            if exponent > MAX_DEGREE:
                raise PowerOverflowError(token.pos, f"指数不超过 {MAX_DEGREE}", token.text)
            try:
                result = power(result, exponent)
            except DegreeBoundError as e:
                raise PowerOverflowError(start, f"总次数不超过 {MAX_DEGREE}", f"总次数 {e.degree}") from None
        return neg(result) if negate else result

    def atom(self) -> StarExpr:
        token = self.current
        if token.kind == "NUMBER":
            self.advance()
            return constant(_number_value(token))
        if token.kind == "LPAREN":
            self.enter(token)
            self.advance()
            result = self.expr()
            self.expect("RPAREN", "')'")
            self.leave()
            return result
        if token.kind == "IDENT" and token.text in _KEYWORDS:
            self.advance()
            if token.text == "i":
                return constant(1j)
            if token.text == "z":
                return Z
            if token.text == "zbar":
                return ZBAR
            return self.exp_call()
        raise ParseError(token.pos, "数字、'i'、'z'、'zbar'、'exp' 或 '('", token.describe())

    def exp_call(self) -> StarExpr:
        self.enter(self.current)
        self.expect("LPAREN", "'('")
        start = self.current.pos
        argument = self.expr()
        self.expect("RPAREN", "')'")
        self.leave()
        if not is_affine(argument):
            raise FamilyViolationError(
                start,
                "z、zbar 的仿射函数 c0 + c1*z + c2*zbar",
                "非线性参数",
                f"第 {start} 字节处: exp 的参数必须是 z、zbar 的仿射函数",
            )
        c0 = coefficient_of(argument, Term(1))
        c1 = coefficient_of(argument, Term(1, 1, 0))
        c2 = coefficient_of(argument, Term(1, 0, 1))
        try:
            coeff = cmath.exp(c0)
        except OverflowError:
            raise ParseError(start, "有限的常数项", f"exp({c0}) 溢出") from None
        # exp(c1 z + c2 zbar) = exp(i(α z + β zbar))，α = c1/i，β = c2/i
        alpha = complex(c1.imag, -c1.real)
        beta = complex(c2.imag, -c2.real)
        return exponential(alpha, beta, coeff)


def _number_value(token: Token) -> complex:
    text = token.text
    imaginary = text.endswith("i")
    magnitude = float(text[:-1] if imaginary else text)
    if not math.isfinite(magnitude):
        raise ParseError(token.pos, "有限数值", token.describe())
    return complex(0.0, magnitude) if imaginary else complex(magnitude)


def _source_bytes(src: Union[str, bytes]) -> bytes:
    if isinstance(src, bytes):
        try:
            src.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(e.start, "UTF-8 文本", f"字节 0x{src[e.start]:02x}") from None
        data = src
    else:
        try:
            data = src.encode("utf-8")
        except UnicodeEncodeError as e:
            position = len(src[:e.start].encode("utf-8"))
            raise ParseError(position, "UTF-8 文本", f"无法编码的字符 {src[e.start]!r}") from None
    if len(data) > MAX_SOURCE_BYTES:
        raise ParseError(0, f"不超过 {MAX_SOURCE_BYTES} 字节的输入", f"{len(data)} 字节")
    return data


def parse(src: Union[str, bytes]) -> StarExpr:
    """
    解析表达式为规范 StarExpr

    Raises:
        ParseError: 语法错误（含字节位置、期望与实际 token）
        FamilyViolationError: exp 参数非仿射
        PowerOverflowError: 幂次或总次数超过上限
    """
    data = _source_bytes(src)
    tokens = tokenize(data)
    logger.debug(f"解析表达式: {len(data)} 字节, {len(tokens)} 个 token")
    return Parser(tokens).parse()


def parse_scalar(src: Union[str, bytes]) -> complex:
    """解析常数表达式，如 "0.1+0.2i" 或 "-2"；非常数输入报错"""
    value = parse(src)
    if not is_constant(value):
        raise ParseError(0, "常数表达式", serialize(value))
    return constant_value(value)


# ---------------------------------------------------------------------------
# 序列化
# ---------------------------------------------------------------------------

def _real_literal(x: float) -> str:
    return format(x + 0.0, ".17g")


def format_scalar(value: complex) -> str:
    """17 位有效数字的数值字面量：实数、纯虚数 "0.5i" 或 "(a+bi)" """
    value = complex(value)
    if value.imag == 0:
        return _real_literal(value.real)
    if value.real == 0:
        return f"{_real_literal(value.imag)}i"
    sign = "+" if value.imag > 0 else "-"
    return f"({_real_literal(value.real)}{sign}{_real_literal(abs(value.imag))}i)"


def _frequency_literal(value: complex) -> str:
    text = format_scalar(value)
    return f"({text})" if text.startswith("-") else text


def _split_sign(value: complex):
    if (value.imag == 0 and value.real < 0) or (value.real == 0 and value.imag < 0):
        return True, -value
    return False, value


def _term_body(term: Term, magnitude: complex) -> str:
    factors = []
    if term.pow_z:
        factors.append("z" if term.pow_z == 1 else f"z^{term.pow_z}")
    if term.pow_zbar:
        factors.append("zbar" if term.pow_zbar == 1 else f"zbar^{term.pow_zbar}")
    if term.has_frequency:
        parts = []
        if term.freq_z != 0:
            parts.append(f"i*{_frequency_literal(term.freq_z)}*z")
        if term.freq_zbar != 0:
            parts.append(f"i*{_frequency_literal(term.freq_zbar)}*zbar")
        factors.append(f"exp({' + '.join(parts)})")
    if not factors:
        return format_scalar(magnitude)
    if magnitude == 1:
        return "*".join(factors)
    return "*".join([format_scalar(magnitude)] + factors)


def serialize(f: StarExpr) -> str:
    """规范文本形式，parse(serialize(f)) 与 f 规范相等"""
    if f.is_zero:
        return "0"
    pieces = []
    for index, term in enumerate(f.terms):
        negative, magnitude = _split_sign(term.coeff)
        body = _term_body(term, magnitude)
        if index == 0:
            pieces.append(f"-{body}" if negative else body)
        else:
            pieces.append(f" - {body}" if negative else f" + {body}")
    return "".join(pieces)
