"""Recursive-descent parser for MiniSol.

One contract per source unit. Doc comments are attached to the contract and
to function declarations; doc comments in any other position are recorded as
orphans on the unit.
"""
from __future__ import annotations

from .nodes import (
    AssignStmt, BalanceExpr, BinaryExpr, Block, BoolLit, CallExpr,
    CallValueExpr, CastExpr, CheckedSubExpr, ContractUnit, DelegatecallExpr,
    DocComment, EmitStmt, EventDecl, Expr, ExprStmt, ForStmt, FunctionDecl,
    Ident, IfStmt, IndexExpr, LengthExpr, Loc, MaxUintExpr, MsgSender,
    MsgValue, NewArrayExpr, NumberLit, OldExpr, Param, QuantExpr, RequireStmt,
    ReturnStmt, SendExpr, Stmt, StringLit, SumExpr, ThisExpr, TupleAssignStmt,
    TypeExpr, UnaryExpr, VarDecl, VarDeclStmt, T_ADDRESS, T_BOOL, T_BYTES,
    T_BYTES32, T_STRING, T_UINT,
)
from .tokens import Token, TYPE_KEYWORDS, tokenize


class ParseError(Exception):
    def __init__(self, message: str, token: Token):
        super().__init__(f"{token.line}:{token.col}: {message}")
        self.message = message
        self.line = token.line
        self.col = token.col


MUTABILITY = ("payable", "view", "pure")
VISIBILITY = ("public", "external", "internal", "private")


class Parser:
    def __init__(self, tokens: list[Token], spec_mode: bool = False):
        self.tokens = tokens
        self.pos = 0
        self.spec_mode = spec_mode  # enables quantifiers/__verifier_* rewrites

    # -- token plumbing ----------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        i = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[i]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def check(self, kind: str, value: str | None = None, offset: int = 0) -> bool:
        tok = self.peek(offset)
        if tok.kind != kind:
            return False
        return value is None or tok.value == value

    def match(self, kind: str, value: str | None = None) -> Token | None:
        if self.check(kind, value):
            return self.advance()
        return None

    def expect(self, kind: str, value: str | None = None, what: str = "") -> Token:
        if self.check(kind, value):
            return self.advance()
        tok = self.peek()
        want = what or (value if value is not None else kind)
        got = tok.value if tok.kind != "EOF" else "end of input"
        raise ParseError(f"expected {want}, found {got!r}", tok)

    def loc(self) -> Loc:
        tok = self.peek()
        return Loc(tok.line, tok.col)

    def take_docs(self) -> list[DocComment]:
        docs = []
        while self.check("DOC"):
            tok = self.advance()
            docs.append(DocComment(raw=tok.value, loc=Loc(tok.line, tok.col)))
        return docs

    # -- unit --------------------------------------------------------------

    def parse_unit(self, origin: str = "<string>") -> ContractUnit:
        unit_docs = self.take_docs()
        self.expect("IDENT", "contract")
        name = self.expect("IDENT", what="contract name").value
        self.expect("PUNCT", "{")
        unit = ContractUnit(name=name, docs=unit_docs, origin=origin)
        ordinal = 0
        while not self.check("PUNCT", "}"):
            if self.check("EOF"):
                raise ParseError("unterminated contract body", self.peek())
            docs = self.take_docs()
            if self.check("PUNCT", "}"):
                unit.orphan_docs.extend(docs)
                break
            if self.check("IDENT", "function") or self.check("IDENT", "constructor"):
                fn = self.parse_function()
                fn.docs = docs
                unit.functions.append(fn)
            elif self.check("IDENT", "event"):
                unit.orphan_docs.extend(docs)
                unit.events.append(self.parse_event())
            else:
                unit.orphan_docs.extend(docs)
                unit.vars.append(self.parse_member_var(ordinal))
                ordinal += 1
        self.expect("PUNCT", "}")
        trailing = self.take_docs()
        unit.orphan_docs.extend(trailing)
        self.expect("EOF", what="end of input (one contract per file)")
        return unit

    # -- declarations ------------------------------------------------------

    def parse_type(self) -> TypeExpr:
        tok = self.peek()
        if tok.kind != "IDENT" or tok.value not in TYPE_KEYWORDS:
            raise ParseError(f"expected a type, found {tok.value!r}", tok)
        self.advance()
        if tok.value == "mapping":
            self.expect("PUNCT", "(")
            key = self.parse_type()
            if not key.is_elementary:
                raise ParseError("mapping keys must be elementary types", tok)
            self.expect("PUNCT", "=>")
            value = self.parse_type()
            self.expect("PUNCT", ")")
            base = TypeExpr("mapping", key=key, value=value)
        else:
            kind = "uint256" if tok.value == "uint" else tok.value
            base = TypeExpr(kind)
        while self.check("PUNCT", "["):
            self.advance()
            self.expect("PUNCT", "]")
            base = TypeExpr("array", elem=base)
        return base

    def parse_member_var(self, ordinal: int) -> VarDecl:
        loc = self.loc()
        ty = self.parse_type()
        visibility = "internal"
        while self.peek().kind == "IDENT" and self.peek().value in VISIBILITY:
            visibility = self.advance().value
        if self.check("IDENT", "constant"):
            raise ParseError("constant state variables are not supported", self.peek())
        name = self.expect("IDENT", what="variable name").value
        if self.check("PUNCT", "="):
            raise ParseError("state variable initializers are not supported", self.peek())
        self.expect("PUNCT", ";")
        return VarDecl(name=name, ty=ty, visibility=visibility, ordinal=ordinal, loc=loc)

    def parse_event(self) -> EventDecl:
        loc = self.loc()
        self.expect("IDENT", "event")
        name = self.expect("IDENT", what="event name").value
        self.expect("PUNCT", "(")
        params = []
        while not self.check("PUNCT", ")"):
            ty = self.parse_type()
            indexed = bool(self.match("IDENT", "indexed"))
            pname = ""
            if self.check("IDENT") and self.peek().value not in ("indexed",):
                pname = self.advance().value
            params.append(Param(name=pname, ty=ty, indexed=indexed))
            if not self.check("PUNCT", ")"):
                self.expect("PUNCT", ",")
        self.expect("PUNCT", ")")
        self.expect("PUNCT", ";")
        return EventDecl(name=name, params=params, loc=loc)

    def parse_params(self) -> list[Param]:
        self.expect("PUNCT", "(")
        params = []
        while not self.check("PUNCT", ")"):
            loc = self.loc()
            ty = self.parse_type()
            location = None
            if self.peek().kind == "IDENT" and self.peek().value in ("memory", "calldata", "storage"):
                location = self.advance().value
            name = ""
            if self.check("IDENT") and self.peek().value not in ("memory", "calldata"):
                name = self.advance().value
            params.append(Param(name=name, ty=ty, location=location, loc=loc))
            if not self.check("PUNCT", ")"):
                self.expect("PUNCT", ",")
        self.expect("PUNCT", ")")
        return params

    def parse_function(self) -> FunctionDecl:
        loc = self.loc()
        is_constructor = False
        name = ""
        is_fallback = False
        if self.match("IDENT", "constructor"):
            is_constructor = True
        else:
            self.expect("IDENT", "function")
            if self.check("PUNCT", "("):
                is_fallback = True
            else:
                name = self.expect("IDENT", what="function name").value
        params = self.parse_params()
        visibility = "public"
        payable = False
        view = False
        returns: list[Param] = []
        while True:
            tok = self.peek()
            if tok.kind == "IDENT" and tok.value in VISIBILITY:
                visibility = self.advance().value
            elif tok.kind == "IDENT" and tok.value in MUTABILITY:
                self.advance()
                if tok.value == "payable":
                    payable = True
                elif tok.value in ("view", "pure"):
                    view = True
            elif tok.kind == "IDENT" and tok.value == "returns":
                self.advance()
                returns = self.parse_params()
            else:
                break
        body = None
        if self.match("PUNCT", ";") is None:
            body = self.parse_block()
        fn = FunctionDecl(
            name=name, params=params, returns=returns, visibility=visibility,
            payable=payable, view=view, is_constructor=is_constructor,
            is_fallback=is_fallback, body=body, loc=loc,
        )
        return fn

    # -- statements --------------------------------------------------------

    def parse_block(self) -> Block:
        loc = self.loc()
        self.expect("PUNCT", "{")
        stmts = []
        while not self.check("PUNCT", "}"):
            if self.check("EOF"):
                raise ParseError("unterminated block", self.peek())
            stmts.append(self.parse_statement())
        self.expect("PUNCT", "}")
        return Block(stmts=stmts, loc=loc)

    def parse_statement(self) -> Stmt:
        loc = self.loc()
        tok = self.peek()
        if tok.kind == "IDENT":
            if tok.value == "if":
                return self.parse_if()
            if tok.value == "for":
                return self.parse_for()
            if tok.value == "while":
                raise ParseError("while loops are not supported; use for", tok)
            if tok.value == "require":
                return self.parse_require()
            if tok.value == "emit":
                return self.parse_emit()
            if tok.value == "return":
                self.advance()
                value = None
                if not self.check("PUNCT", ";"):
                    value = self.parse_expression()
                self.expect("PUNCT", ";")
                return ReturnStmt(value=value, loc=loc)
            if tok.value == "delete":
                raise ParseError("delete is not supported", tok)
            if tok.value in TYPE_KEYWORDS:
                return self.parse_local_decl()
        if self.check("PUNCT", "("):
            return self.parse_tuple_assign()
        return self.parse_assign_or_expr()

    def parse_local_decl(self) -> Stmt:
        loc = self.loc()
        ty = self.parse_type()
        if ty.kind == "mapping":
            raise ParseError("local mapping variables are not supported", self.peek())
        if self.peek().kind == "IDENT" and self.peek().value in ("memory", "calldata", "storage"):
            self.advance()
        name = self.expect("IDENT", what="variable name").value
        init = None
        if self.match("PUNCT", "="):
            init = self.parse_expression()
        self.expect("PUNCT", ";")
        return VarDeclStmt(ty=ty, name=name, init=init, loc=loc)

    def parse_if(self) -> IfStmt:
        loc = self.loc()
        self.expect("IDENT", "if")
        self.expect("PUNCT", "(")
        cond = self.parse_expression()
        self.expect("PUNCT", ")")
        then = self.parse_block() if self.check("PUNCT", "{") else Block(stmts=[self.parse_statement()])
        otherwise = None
        if self.match("IDENT", "else"):
            if self.check("IDENT", "if"):
                otherwise = Block(stmts=[self.parse_if()])
            else:
                otherwise = self.parse_block() if self.check("PUNCT", "{") else Block(stmts=[self.parse_statement()])
        return IfStmt(cond=cond, then=then, otherwise=otherwise, loc=loc)

    def parse_for(self) -> ForStmt:
        loc = self.loc()
        self.expect("IDENT", "for")
        self.expect("PUNCT", "(")
        init = None
        if not self.check("PUNCT", ";"):
            if self.peek().kind == "IDENT" and self.peek().value in TYPE_KEYWORDS:
                init = self.parse_local_decl()  # consumes the ';'
            else:
                init = self.parse_simple_assign()
                self.expect("PUNCT", ";")
        else:
            self.expect("PUNCT", ";")
        cond = None
        if not self.check("PUNCT", ";"):
            cond = self.parse_expression()
        self.expect("PUNCT", ";")
        update = None
        if not self.check("PUNCT", ")"):
            update = self.parse_for_update()
        self.expect("PUNCT", ")")
        body = self.parse_block() if self.check("PUNCT", "{") else Block(stmts=[self.parse_statement()])
        return ForStmt(init=init, cond=cond, update=update, body=body, loc=loc)

    def parse_for_update(self) -> Stmt:
        loc = self.loc()
        # ++i / i++ desugar to i += 1
        if self.check("PUNCT", "++"):
            self.advance()
            name = self.expect("IDENT", what="loop variable").value
            return AssignStmt(target=Ident(name=name, loc=loc), op="+=",
                              value=NumberLit(value=1, loc=loc), loc=loc)
        if self.check("IDENT") and self.check("PUNCT", "++", offset=1):
            name = self.advance().value
            self.advance()
            return AssignStmt(target=Ident(name=name, loc=loc), op="+=",
                              value=NumberLit(value=1, loc=loc), loc=loc)
        return self.parse_simple_assign()

    def parse_simple_assign(self) -> AssignStmt:
        loc = self.loc()
        target = self.parse_postfix()
        for op in ("=", "+=", "-="):
            if self.match("PUNCT", op):
                value = self.parse_expression()
                return AssignStmt(target=target, op=op, value=value, loc=loc)
        raise ParseError("expected assignment", self.peek())

    def parse_require(self) -> RequireStmt:
        loc = self.loc()
        self.expect("IDENT", "require")
        self.expect("PUNCT", "(")
        cond = self.parse_expression()
        message = None
        if self.match("PUNCT", ","):
            message = self.expect("STRING", what="revert message").value
        self.expect("PUNCT", ")")
        self.expect("PUNCT", ";")
        return RequireStmt(cond=cond, message=message, loc=loc)

    def parse_emit(self) -> EmitStmt:
        loc = self.loc()
        self.expect("IDENT", "emit")
        name = self.expect("IDENT", what="event name").value
        self.expect("PUNCT", "(")
        args = []
        while not self.check("PUNCT", ")"):
            args.append(self.parse_expression())
            if not self.check("PUNCT", ")"):
                self.expect("PUNCT", ",")
        self.expect("PUNCT", ")")
        self.expect("PUNCT", ";")
        return EmitStmt(event=name, args=args, loc=loc)

    def parse_tuple_assign(self) -> TupleAssignStmt:
        loc = self.loc()
        self.expect("PUNCT", "(")
        targets: list[str | None] = []
        while True:
            if self.check("PUNCT", ",") or self.check("PUNCT", ")"):
                targets.append(None)
            else:
                targets.append(self.expect("IDENT", what="assignment target").value)
            if self.match("PUNCT", ","):
                continue
            break
        self.expect("PUNCT", ")")
        self.expect("PUNCT", "=")
        value = self.parse_expression()
        self.expect("PUNCT", ";")
        if not isinstance(value, (CallValueExpr, DelegatecallExpr)):
            raise ParseError("tuple destructuring is only supported for call results", self.peek())
        return TupleAssignStmt(targets=targets, value=value, loc=loc)

    def parse_assign_or_expr(self) -> Stmt:
        loc = self.loc()
        expr = self.parse_expression()
        for op in ("=", "+=", "-="):
            if self.match("PUNCT", op):
                if not isinstance(expr, (Ident, IndexExpr)):
                    raise ParseError("invalid assignment target", self.peek())
                value = self.parse_expression()
                self.expect("PUNCT", ";")
                return AssignStmt(target=expr, op=op, value=value, loc=loc)
        self.expect("PUNCT", ";")
        return ExprStmt(expr=expr, loc=loc)

    # -- expressions -------------------------------------------------------

    def parse_expression(self) -> Expr:
        if self.spec_mode and self.check("IDENT") and self.peek().value in ("forall", "exists"):
            return self.parse_quantifier()
        return self.parse_or()

    def parse_quantifier(self) -> Expr:
        loc = self.loc()
        quant = self.advance().value
        self.expect("PUNCT", "(")
        var_ty = self.parse_type()
        if not var_ty.is_elementary:
            raise ParseError("quantified variables must have elementary type", self.peek())
        var = self.expect("IDENT", what="quantified variable").value
        self.expect("PUNCT", ")")
        body = self.parse_expression()
        return QuantExpr(quant=quant, var_ty=var_ty, var=var, body=body, loc=loc)

    def parse_or(self) -> Expr:
        left = self.parse_and()
        while self.check("PUNCT", "||"):
            loc = self.loc()
            self.advance()
            right = self.parse_and()
            left = BinaryExpr(op="||", left=left, right=right, loc=loc)
        return left

    def parse_and(self) -> Expr:
        left = self.parse_equality()
        while self.check("PUNCT", "&&"):
            loc = self.loc()
            self.advance()
            right = self.parse_equality()
            left = BinaryExpr(op="&&", left=left, right=right, loc=loc)
        return left

    def parse_equality(self) -> Expr:
        left = self.parse_relational()
        while self.check("PUNCT", "==") or self.check("PUNCT", "!="):
            loc = self.loc()
            op = self.advance().value
            right = self.parse_relational()
            left = BinaryExpr(op=op, left=left, right=right, loc=loc)
        return left

    def parse_relational(self) -> Expr:
        left = self.parse_additive()
        while self.peek().kind == "PUNCT" and self.peek().value in ("<", "<=", ">", ">="):
            loc = self.loc()
            op = self.advance().value
            right = self.parse_additive()
            left = BinaryExpr(op=op, left=left, right=right, loc=loc)
        return left

    def parse_additive(self) -> Expr:
        left = self.parse_multiplicative()
        while self.peek().kind == "PUNCT" and self.peek().value in ("+", "-"):
            loc = self.loc()
            op = self.advance().value
            right = self.parse_multiplicative()
            left = BinaryExpr(op=op, left=left, right=right, loc=loc)
        return left

    def parse_multiplicative(self) -> Expr:
        left = self.parse_unary()
        while self.peek().kind == "PUNCT" and self.peek().value in ("*", "/", "%"):
            if self.check("PUNCT", "**"):
                raise ParseError("exponentiation is not supported", self.peek())
            loc = self.loc()
            op = self.advance().value
            right = self.parse_unary()
            left = BinaryExpr(op=op, left=left, right=right, loc=loc)
        return left

    def parse_unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "PUNCT" and tok.value in ("!", "-"):
            loc = self.loc()
            op = self.advance().value
            operand = self.parse_unary()
            return UnaryExpr(op=op, operand=operand, loc=loc)
        if tok.kind == "PUNCT" and tok.value == "**":
            raise ParseError("exponentiation is not supported", tok)
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        expr = self.parse_primary()
        while True:
            if self.check("PUNCT", "["):
                loc = self.loc()
                self.advance()
                index = self.parse_expression()
                self.expect("PUNCT", "]")
                expr = IndexExpr(base=expr, index=index, loc=loc)
            elif self.check("PUNCT", "."):
                loc = self.loc()
                self.advance()
                member = self.expect("IDENT", what="member name").value
                expr = self.finish_member(expr, member, loc)
            else:
                return expr

    def finish_member(self, base: Expr, member: str, loc: Loc) -> Expr:
        if isinstance(base, Ident) and base.name == "msg":
            if member == "sender":
                return MsgSender(loc=loc)
            if member == "value":
                return MsgValue(loc=loc)
            raise ParseError(f"unknown msg member {member!r}", self.peek())
        if member == "balance":
            return BalanceExpr(operand=base, loc=loc)
        if member == "length":
            return LengthExpr(operand=base, loc=loc)
        if member == "send":
            self.expect("PUNCT", "(")
            amount = self.parse_expression()
            self.expect("PUNCT", ")")
            return SendExpr(to=base, amount=amount, loc=loc)
        if member == "sub":
            self.expect("PUNCT", "(")
            arg = self.parse_expression()
            self.expect("PUNCT", ")")
            return CheckedSubExpr(base=base, arg=arg, loc=loc)
        if member == "call":
            self.expect("PUNCT", ".")
            self.expect("IDENT", "value")
            self.expect("PUNCT", "(")
            amount = self.parse_expression()
            self.expect("PUNCT", ")")
            self.expect("PUNCT", "(")
            sig, args = self.parse_call_payload()
            return CallValueExpr(target=base, amount=amount, sig=sig, args=args, loc=loc)
        if member == "delegatecall":
            self.expect("PUNCT", "(")
            sig, args = self.parse_call_payload()
            return DelegatecallExpr(target=base, sig=sig, args=args, loc=loc)
        raise ParseError(f"unknown member {member!r}", self.peek())

    def parse_call_payload(self) -> tuple[str, list[Expr]]:
        """Signature string + argument list, closing paren consumed."""
        sig = self.expect("STRING", what="call signature string").value
        args = []
        while self.match("PUNCT", ","):
            args.append(self.parse_expression())
        self.expect("PUNCT", ")")
        return sig, args

    def parse_primary(self) -> Expr:
        tok = self.peek()
        loc = self.loc()
        if tok.kind == "NUMBER":
            self.advance()
            return NumberLit(value=tok.number, loc=loc)
        if tok.kind == "STRING":
            self.advance()
            return StringLit(value=tok.value, loc=loc)
        if tok.kind == "PUNCT" and tok.value == "(":
            self.advance()
            expr = self.parse_expression()
            self.expect("PUNCT", ")")
            return expr
        if tok.kind != "IDENT":
            raise ParseError(f"unexpected token {tok.value!r}", tok)
        if tok.value == "true":
            self.advance()
            return BoolLit(value=True, loc=loc)
        if tok.value == "false":
            self.advance()
            return BoolLit(value=False, loc=loc)
        if tok.value == "this":
            self.advance()
            return ThisExpr(loc=loc)
        if tok.value == "new":
            self.advance()
            elem = self.parse_type()
            if elem.kind != "array":
                raise ParseError("only new T[](n) allocations are supported", tok)
            self.expect("PUNCT", "(")
            length = self.parse_expression()
            self.expect("PUNCT", ")")
            return NewArrayExpr(elem=elem.elem, length=length, loc=loc)
        if tok.value in TYPE_KEYWORDS and self.check("PUNCT", "(", offset=1):
            return self.parse_cast()
        self.advance()
        name = tok.value
        if self.check("PUNCT", "("):
            self.advance()
            args = []
            while not self.check("PUNCT", ")"):
                args.append(self.parse_expression())
                if not self.check("PUNCT", ")"):
                    self.expect("PUNCT", ",")
            self.expect("PUNCT", ")")
            if self.spec_mode and name in ("__verifier_old_uint", "__verifier_old_bool"):
                if len(args) != 1:
                    raise ParseError(f"{name} takes one argument", tok)
                kind = "uint" if name.endswith("uint") else "bool"
                return OldExpr(kind=kind, operand=args[0], loc=loc)
            if self.spec_mode and name == "__verifier_sum_uint":
                if len(args) != 1 or not isinstance(args[0], Ident):
                    raise ParseError("__verifier_sum_uint takes a mapping variable name", tok)
                return SumExpr(mapping=args[0].name, loc=loc)
            return CallExpr(name=name, args=args, loc=loc)
        return Ident(name=name, loc=loc)

    def parse_cast(self) -> Expr:
        tok = self.advance()  # type keyword
        loc = Loc(tok.line, tok.col)
        kind = "uint256" if tok.value == "uint" else tok.value
        if kind in ("mapping", "bytes", "string"):
            raise ParseError(f"cannot cast to {tok.value}", tok)
        self.expect("PUNCT", "(")
        # uint(-1) is the idiomatic max-uint literal.
        if kind == "uint256" and self.check("PUNCT", "-") and self.check("NUMBER", offset=1) \
                and self.peek(1).number == 1 and self.check("PUNCT", ")", offset=2):
            self.advance()
            self.advance()
            self.advance()
            return MaxUintExpr(loc=loc)
        operand = self.parse_expression()
        self.expect("PUNCT", ")")
        target = {"uint256": T_UINT, "bool": T_BOOL, "address": T_ADDRESS,
                  "bytes32": T_BYTES32}.get(kind)
        if target is None:
            raise ParseError(f"cannot cast to {tok.value}", tok)
        return CastExpr(target=target, operand=operand, loc=loc)


def parse_source(source: str, origin: str = "<string>") -> ContractUnit:
    """Lex + parse one contract. Raises LexError or ParseError."""
    return Parser(tokenize(source)).parse_unit(origin)


def parse_spec_expression(text: str) -> Expr:
    """Parse a single specification expression (quantifiers and __verifier_*
    forms enabled). Raises ParseError on trailing input."""
    parser = Parser(tokenize(text), spec_mode=True)
    expr = parser.parse_expression()
    parser.expect("EOF", what="end of condition")
    return expr
