"""Fixed-format MPS and LP-text writers and readers for :class:`MilpModel`.

MPS names are limited to 8 characters. Longer or clashing names are replaced
and the mapping is written as ``* RENAME exported original`` comment lines,
which :func:`read_mps` uses to restore the originals. Numbers are written in
the 12-character MPS fields with as many significant digits as fit.
"""

from __future__ import annotations

import math
import re
from collections import defaultdict
from typing import Dict, List, Tuple

from ..formulation import BINARY, CONTINUOUS, INTEGER, ModelBuilder, MilpModel

OBJ_ROW = "COST"


class ModelFormatError(ValueError):
    pass


def _compact_e(v: float, p: int) -> str:
    mant, exp = f"{v:.{p}e}".split("e")
    if "." in mant:
        mant = mant.rstrip("0").rstrip(".")
    return f"{mant}e{int(exp)}"


def _num(v: float, width: int = 12) -> str:
    if v == int(v) and abs(v) < 1e11:
        s = str(int(v))
        if len(s) <= width:
            return s
    for p in range(17, 0, -1):
        for s in (f"{v:.{p}g}", _compact_e(v, p - 1)):
            if len(s) <= width and float(s) == float(f"{v:.{p}g}"):
                return s
    raise ModelFormatError(f"cannot fit {v!r} in {width} characters")


def _short_names(names: List[str], prefix: str, reserved=()) -> Dict[str, str]:
    out: Dict[str, str] = {}
    taken = set(reserved)
    for nm in names:
        if len(nm) <= 8 and " " not in nm and nm not in taken:
            out[nm] = nm
            taken.add(nm)
    k = 0
    for nm in names:
        if nm in out:
            continue
        while True:
            k += 1
            cand = f"{prefix}{k:07d}"
            if cand not in taken:
                break
        out[nm] = cand
        taken.add(cand)
    return out


def _field_line(f1: str = "", f2: str = "", f3: str = "", f4: str = "", f5: str = "", f6: str = "") -> str:
    line = " " + f1.ljust(2) + " " + f2.ljust(8) + "  " + f3.ljust(8) + "  " + f4.rjust(12)
    if f5:
        line += "   " + f5.ljust(8) + "  " + f6.rjust(12)
    return line.rstrip()


def write_mps(model: MilpModel) -> bytes:
    cols = _short_names([v.name for v in model.variables], "C")
    rows = _short_names([c.name for c in model.constraints], "R", reserved=(OBJ_ROW,))
    out = [f"* {model.name}"]
    for nm, short in cols.items():
        if nm != short:
            out.append(f"* RENAME C {short} {nm}")
    for nm, short in rows.items():
        if nm != short:
            out.append(f"* RENAME R {short} {nm}")
    out.append("NAME".ljust(14) + model.name[:8].replace(" ", "_"))
    out.append("ROWS")
    out.append(_field_line("N", OBJ_ROW))
    kind = {"<=": "L", ">=": "G", "=": "E"}
    for c in model.constraints:
        out.append(_field_line(kind[c.sense], rows[c.name]))
    out.append("COLUMNS")
    entries: Dict[int, List[Tuple[str, float]]] = defaultdict(list)
    for j, v in model.objective:
        entries[j].append((OBJ_ROW, v))
    for c in model.constraints:
        for j, v in c.coefs:
            entries[j].append((rows[c.name], v))
    in_int = False
    marker = 0
    for j, var in enumerate(model.variables):
        is_int = var.kind != CONTINUOUS
        if is_int != in_int:
            tag = "'INTORG'" if is_int else "'INTEND'"
            out.append(f"    M{marker:07d}  'MARKER'                 {tag}")
            marker += 1
            in_int = is_int
        ent = entries.get(j) or [(OBJ_ROW, 0.0)]
        for k in range(0, len(ent), 2):
            (r1, v1) = ent[k]
            if k + 1 < len(ent):
                r2, v2 = ent[k + 1]
                out.append(_field_line("", cols[var.name], r1, _num(v1), r2, _num(v2)))
            else:
                out.append(_field_line("", cols[var.name], r1, _num(v1)))
    if in_int:
        out.append(f"    M{marker:07d}  'MARKER'                 'INTEND'")
    out.append("RHS")
    if model.obj_const:
        out.append(_field_line("", "RHS", OBJ_ROW, _num(-model.obj_const)))
    for c in model.constraints:
        if c.rhs:
            out.append(_field_line("", "RHS", rows[c.name], _num(c.rhs)))
    out.append("BOUNDS")
    for var in model.variables:
        nm = cols[var.name]
        lo, hi = var.lb, var.ub
        if lo == hi:
            out.append(_field_line("FX", "BND", nm, _num(lo)))
            continue
        if math.isinf(lo) and math.isinf(hi):
            out.append(_field_line("FR", "BND", nm))
            continue
        if math.isinf(lo):
            out.append(_field_line("MI", "BND", nm))
        else:
            out.append(_field_line("LO", "BND", nm, _num(lo)))
        if math.isinf(hi):
            out.append(_field_line("PL", "BND", nm))
        else:
            out.append(_field_line("UP", "BND", nm, _num(hi)))
    out.append("ENDATA")
    return ("\n".join(out) + "\n").encode("ascii")


def _fixed_fields(line: str) -> List[str]:
    line = line.ljust(61)
    return [line[1:3].strip(), line[4:12].strip(), line[14:22].strip(), line[24:36].strip(),
            line[39:47].strip(), line[49:61].strip()]


def read_mps(data: bytes) -> MilpModel:
    text = data.decode("ascii") if isinstance(data, (bytes, bytearray)) else data
    rename = {"C": {}, "R": {}}
    name = "model"
    section = None
    row_sense: Dict[str, str] = {}
    row_order: List[str] = []
    obj_row = None
    col_order: List[str] = []
    col_int: Dict[str, bool] = {}
    coefs: Dict[str, Dict[str, float]] = defaultdict(dict)
    rhs: Dict[str, float] = {}
    bounds: Dict[str, list] = {}
    in_int = False
    for ln, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        if raw.startswith("*"):
            tok = raw.split()
            if len(tok) == 5 and tok[1] == "RENAME":
                rename[tok[2]][tok[3]] = tok[4]
            elif len(tok) >= 2 and ln == 1:
                name = tok[1]
            continue
        if not raw.startswith(" "):
            head = raw.split()
            section = head[0]
            if section not in ("NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA"):
                raise ModelFormatError(f"line {ln}: unknown section {section}")
            if section == "RANGES":
                raise ModelFormatError(f"line {ln}: RANGES are not supported")
            continue
        f = _fixed_fields(raw)
        if section == "ROWS":
            sense = {"N": None, "L": "<=", "G": ">=", "E": "="}.get(f[0], "bad")
            if sense == "bad":
                raise ModelFormatError(f"line {ln}: bad row type {f[0]!r}")
            if sense is None:
                obj_row = obj_row or f[1]
            else:
                row_sense[f[1]] = sense
                row_order.append(f[1])
        elif section == "COLUMNS":
            if "'MARKER'" in raw:
                in_int = "'INTORG'" in raw
                continue
            col = f[1]
            if col not in col_int:
                col_order.append(col)
                col_int[col] = in_int
            for rname, val in ((f[2], f[3]), (f[4], f[5])):
                if not rname:
                    continue
                if rname != obj_row and rname not in row_sense:
                    raise ModelFormatError(f"line {ln}: unknown row {rname}")
                coefs[col][rname] = coefs[col].get(rname, 0.0) + float(val)
        elif section == "RHS":
            for rname, val in ((f[2], f[3]), (f[4], f[5])):
                if rname:
                    rhs[rname] = float(val)
        elif section == "BOUNDS":
            typ, col, val = f[0], f[2], f[3]
            if col not in col_int:
                raise ModelFormatError(f"line {ln}: bound on unknown column {col}")
            b = bounds.setdefault(col, [0.0, math.inf])
            if typ == "LO":
                b[0] = float(val)
            elif typ == "UP":
                b[1] = float(val)
            elif typ == "FX":
                b[0] = b[1] = float(val)
            elif typ == "FR":
                b[0], b[1] = -math.inf, math.inf
            elif typ == "MI":
                b[0] = -math.inf
            elif typ == "PL":
                b[1] = math.inf
            elif typ == "BV":
                b[0], b[1] = 0.0, 1.0
            else:
                raise ModelFormatError(f"line {ln}: bound type {typ!r} not supported")
    cname = lambda c: rename["C"].get(c, c)  # noqa: E731
    rname = lambda r: rename["R"].get(r, r)  # noqa: E731
    b = ModelBuilder(name)
    for col in col_order:
        lo, hi = bounds.get(col, [0.0, math.inf])
        kind = CONTINUOUS
        if col_int[col]:
            kind = BINARY if (lo, hi) == (0.0, 1.0) else INTEGER
        b.add_var(cname(col), kind, lo, hi)
    rows: Dict[str, Dict[str, float]] = {r: {} for r in row_order}
    for col, ent in coefs.items():
        for r, v in ent.items():
            if r == obj_row:
                b.objective[cname(col)] += v
            else:
                rows[r][cname(col)] = v
    for r in row_order:
        b.add_con(rname(r), rows[r], row_sense[r], rhs.get(r, 0.0))
    b.obj_const = -rhs.get(obj_row, 0.0) if obj_row else 0.0
    return b.build()


# ---------------------------------------------------------------------------
# LP text


def _lp_num(v: float) -> str:
    return repr(float(v)) if v != int(v) or abs(v) >= 1e15 else str(int(v))


def _lp_expr(terms: List[Tuple[str, float]]) -> List[str]:
    toks = []
    for k, (nm, v) in enumerate(terms):
        sign = "-" if v < 0 else "+"
        mag = abs(v)
        body = nm if mag == 1.0 else f"{_lp_num(mag)} {nm}"
        toks.append(f"{sign} {body}" if k or sign == "-" else body)
    return toks


def _wrap(prefix: str, toks: List[str], width: int = 250) -> List[str]:
    lines, cur = [], prefix
    for t in toks:
        if len(cur) + len(t) + 1 > width:
            lines.append(cur)
            cur = "   "
        cur += " " + t
    lines.append(cur)
    return lines


def write_lp(model: MilpModel) -> bytes:
    names = [v.name for v in model.variables]
    out = [f"\\ {model.name}", "Minimize"]
    obj = [(names[j], v) for j, v in model.objective]
    toks = _lp_expr(obj) or ["0 " + names[0]] if names else []
    if model.obj_const:
        toks.append(("+ " if model.obj_const > 0 else "- ") + _lp_num(abs(model.obj_const)))
    out += _wrap(" obj:", toks)
    out.append("Subject To")
    for c in model.constraints:
        terms = [(names[j], v) for j, v in c.coefs] or [(names[0], 0.0)]
        toks = _lp_expr(terms) + [c.sense, _lp_num(c.rhs)]
        out += _wrap(f" {c.name}:", toks)
    out.append("Bounds")
    for v in model.variables:
        lo, hi = v.lb, v.ub
        if math.isinf(lo) and math.isinf(hi):
            out.append(f" {v.name} free")
        elif lo == hi:
            out.append(f" {v.name} = {_lp_num(lo)}")
        else:
            left = "-inf" if math.isinf(lo) else _lp_num(lo)
            right = "+inf" if math.isinf(hi) else _lp_num(hi)
            out.append(f" {left} <= {v.name} <= {right}")
    gen = [v.name for v in model.variables if v.kind == INTEGER]
    binv = [v.name for v in model.variables if v.kind == BINARY]
    if gen:
        out.append("General")
        out += _wrap("", gen)
    if binv:
        out.append("Binary")
        out += _wrap("", binv)
    out.append("End")
    return ("\n".join(out) + "\n").encode("ascii")


_SECTIONS = {
    "minimize": "obj", "minimise": "obj", "min": "obj",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "general": "gen", "generals": "gen", "gen": "gen",
    "binary": "bin", "binaries": "bin", "bin": "bin", "end": "end",
}


def _parse_expr(text: str, ln: int):
    """Linear expression -> ({name: coef}, constant)."""
    terms: Dict[str, float] = {}
    const = 0.0
    toks = re.findall(r"[+-]|[0-9][0-9.]*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|[A-Za-z_][\w.\[\]]*|\S", text)
    sign, coef = 1.0, None
    for tok in toks:
        if tok in "+-":
            if coef is not None:
                const += sign * coef
                coef = None
            sign = 1.0 if tok == "+" else -1.0
            continue
        if tok[0].isdigit() or tok[0] == ".":
            coef = float(tok) if coef is None else coef * float(tok)
            continue
        if re.match(r"[A-Za-z_]", tok):
            terms[tok] = terms.get(tok, 0.0) + sign * (1.0 if coef is None else coef)
            sign, coef = 1.0, None
            continue
        raise ModelFormatError(f"line {ln}: unexpected token {tok!r}")
    if coef is not None:
        const += sign * coef
    return terms, const


def read_lp(data: bytes) -> MilpModel:
    text = data.decode("ascii") if isinstance(data, (bytes, bytearray)) else data
    name = "model"
    section = None
    chunks: Dict[str, List[Tuple[int, str]]] = defaultdict(list)
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("\\"):
            if ln == 1:
                name = line[1:].strip() or name
            continue
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "end":
                break
            continue
        if key.startswith("maximize") or key.startswith("maximise") or key == "max":
            raise ModelFormatError(f"line {ln}: only minimization is supported")
        if section is None:
            raise ModelFormatError(f"line {ln}: text before the objective section")
        chunks[section].append((ln, line))

    def statements(sec):
        # a statement continues on lines that start with whitespace-free operators or no label
        stmts, cur, start = [], "", 0
        for ln, line in chunks.get(sec, []):
            if re.match(r"^[A-Za-z_][\w.\[\]]*\s*:", line) and cur:
                stmts.append((start, cur))
                cur = ""
            if not cur:
                start = ln
            cur += " " + line
        if cur:
            stmts.append((start, cur))
        return stmts

    b = ModelBuilder(name)
    order: List[str] = []

    def ensure(nm):
        if nm not in b.vars:
            b.add_var(nm, CONTINUOUS, 0.0, math.inf)
            order.append(nm)

    obj_stmts = statements("obj")
    cons = []
    for ln, st in statements("st"):
        m = re.match(r"^\s*([A-Za-z_][\w.\[\]]*)\s*:(.*)$", st)
        cname, body = (m.group(1), m.group(2)) if m else (f"c{len(cons) + 1}", st)
        m2 = re.match(r"^(.*?)(<=|>=|=<|=>|<|>|=)(.*)$", body)
        if not m2:
            raise ModelFormatError(f"line {ln}: constraint {cname} has no sense")
        lhs, const = _parse_expr(m2.group(1), ln)
        rhs_terms, rhs_const = _parse_expr(m2.group(3), ln)
        if rhs_terms:
            raise ModelFormatError(f"line {ln}: variables on the right-hand side")
        sense = {"<=": "<=", "=<": "<=", "<": "<=", ">=": ">=", "=>": ">=", ">": ">=", "=": "="}[m2.group(2)]
        cons.append((cname, lhs, sense, rhs_const - const))
    obj_terms, obj_const = {}, 0.0
    for ln, st in obj_stmts:
        body = st.split(":", 1)[1] if re.match(r"^\s*[A-Za-z_][\w.\[\]]*\s*:", st) else st
        obj_terms, obj_const = _parse_expr(body, ln)
    bounds: Dict[str, list] = {}
    for ln, line in chunks.get("bounds", []):
        toks = line.split()
        if len(toks) == 2 and toks[1].lower() == "free":
            bounds[toks[0]] = [-math.inf, math.inf]
        elif len(toks) == 3 and toks[1] == "=":
            v = float(toks[2])
            bounds[toks[0]] = [v, v]
        elif len(toks) == 5 and toks[1] == "<=" and toks[3] == "<=":
            bounds[toks[2]] = [float(toks[0]), float(toks[4])]
        elif len(toks) == 3 and toks[1] in ("<=", ">="):
            b0 = bounds.setdefault(toks[0], [0.0, math.inf])
            b0[1 if toks[1] == "<=" else 0] = float(toks[2])
        else:
            raise ModelFormatError(f"line {ln}: unsupported bound {line!r}")
    kinds: Dict[str, str] = {}
    for sec, kind in (("gen", INTEGER), ("bin", BINARY)):
        for _, line in chunks.get(sec, []):
            for nm in line.split():
                kinds[nm] = kind
    # declare in first-appearance order
    seen: List[str] = []
    for nm in list(obj_terms) + [v for c in cons for v in c[1]] + list(bounds) + list(kinds):
        if nm not in seen:
            seen.append(nm)
    for nm in seen:
        lo, hi = bounds.get(nm, [0.0, math.inf])
        kind = kinds.get(nm, CONTINUOUS)
        if kind == BINARY and nm not in bounds:
            lo, hi = 0.0, 1.0
        b.add_var(nm, kind, lo, hi)
    for nm, v in obj_terms.items():
        b.objective[nm] += v
    b.obj_const = obj_const
    for cname, lhs, sense, rhs in cons:
        b.add_con(cname, lhs, sense, rhs)
    return b.build()


# ---------------------------------------------------------------------------


def export_model(model: MilpModel, fmt: str = "mps") -> bytes:
    if fmt == "mps":
        return write_mps(model)
    if fmt == "lp":
        return write_lp(model)
    raise ModelFormatError(f"unknown export format {fmt!r}")


def import_model(data: bytes, fmt: str = "mps") -> MilpModel:
    if fmt == "mps":
        return read_mps(data)
    if fmt == "lp":
        return read_lp(data)
    raise ModelFormatError(f"unknown import format {fmt!r}")


def canonical(model: MilpModel, digits: int = 9):
    """Order-independent summary for comparing models (values rounded to ``digits``)."""
    r = lambda v: v if math.isinf(v) else float(f"{v:.{digits}g}")  # noqa: E731
    names = [v.name for v in model.variables]
    var = tuple(sorted((v.name, v.kind, r(v.lb), r(v.ub)) for v in model.variables))
    rows = tuple(sorted(
        (c.name, c.sense, r(c.rhs), tuple(sorted((names[j], r(v)) for j, v in c.coefs if v)))
        for c in model.constraints
    ))
    obj = tuple(sorted((names[j], r(v)) for j, v in model.objective if v))
    return var, rows, obj, r(model.obj_const)
