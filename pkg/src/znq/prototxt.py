"""Text-format network descriptions: parsing and serialization.

The accepted language is the protobuf text format subset used by network
description files: ``key: value`` scalars, nested ``key { ... }`` blocks,
repeated keys, ``#`` comments, quoted strings, bare enum identifiers and
booleans. Layers are ``layer { ... }`` blocks; the legacy top-level
``input:`` / ``input_dim:`` quadruple is accepted and becomes a data layer.
The older ``layers`` (v1, enum-typed) dialect is rejected outright.

Unknown but well-formed fields are kept as opaque annotations and written
back on serialization, so parse -> serialize round-trips are lossless up to
field order. Parsing never raises anything but ParseError subclasses or the
layer-construction errors, regardless of input bytes.
"""

from dataclasses import dataclass, field

from . import ir
from .errors import DuplicateLayerName, ParseError, UnsupportedLayer

MAX_NESTING = 64


@dataclass(frozen=True)
class SourceSpan:
    line: int
    col: int
    length: int


@dataclass(frozen=True)
class Bare:
    """An unquoted identifier value (enum or boolean), kept as written."""

    text: str


@dataclass
class RawField:
    """One ``key: value`` or ``key { ... }`` entry, used for unknown fields."""

    key: str
    value: object          # scalar (int/float/str/Bare) or list[RawField]
    is_block: bool = False
    span: SourceSpan = None

    def __eq__(self, other):
        if not isinstance(other, RawField):
            return NotImplemented
        return (self.key, self.value, self.is_block) == (
            other.key, other.value, other.is_block)


# --- tokenizer ----------------------------------------------------------------

_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789")
_NUM_START = set("0123456789+-.")

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "'": "'", "\\": "\\", "0": "\0"}


@dataclass(frozen=True)
class _Token:
    kind: str      # IDENT NUMBER STRING { } : EOF
    text: str
    value: object
    span: SourceSpan


def _tokenize(text):
    toks = []
    i, line, col = 0, 1, 1
    n = len(text)

    def span(start_col, length):
        return SourceSpan(line, start_col, max(length, 1))

    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r,;":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if c in "{}:":
            kind = {"{": "{", "}": "}", ":": ":"}[c]
            toks.append(_Token(kind, c, c, span(start_col, 1)))
            i += 1
            col += 1
            continue
        if c in ('"', "'"):
            quote = c
            j = i + 1
            out = []
            while True:
                if j >= n or text[j] == "\n":
                    raise ParseError(
                        "unterminated string literal",
                        span=span(start_col, j - i),
                        expected=[quote])
                ch = text[j]
                if ch == quote:
                    j += 1
                    break
                if ch == "\\":
                    if j + 1 >= n:
                        raise ParseError(
                            "unterminated escape in string literal",
                            span=span(start_col, j - i))
                    out.append(_ESCAPES.get(text[j + 1], text[j + 1]))
                    j += 2
                    continue
                out.append(ch)
                j += 1
            toks.append(_Token("STRING", text[i:j], "".join(out),
                               span(start_col, j - i)))
            col += j - i
            i = j
            continue
        if c in _NUM_START:
            j = i
            if text[j] in "+-":
                j += 1
            digits = 0
            while j < n and text[j] in "0123456789":
                j += 1
                digits += 1
            is_float = False
            if j < n and text[j] == ".":
                is_float = True
                j += 1
                while j < n and text[j] in "0123456789":
                    j += 1
                    digits += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k] in "0123456789":
                    is_float = True
                    j = k
                    while j < n and text[j] in "0123456789":
                        j += 1
            tok_text = text[i:j]
            if digits == 0:
                raise ParseError(
                    "malformed number %r" % tok_text,
                    span=span(start_col, max(j - i, 1)),
                    expected=["digit"])
            try:
                value = float(tok_text) if is_float else int(tok_text)
            except (ValueError, OverflowError):
                raise ParseError(
                    "malformed number %r" % tok_text,
                    span=span(start_col, j - i))
            toks.append(_Token("NUMBER", tok_text, value,
                               span(start_col, j - i)))
            col += j - i
            i = j
            continue
        if c in _IDENT_START:
            j = i
            while j < n and text[j] in _IDENT_CONT:
                j += 1
            tok_text = text[i:j]
            toks.append(_Token("IDENT", tok_text, tok_text,
                               span(start_col, j - i)))
            col += j - i
            i = j
            continue
        raise ParseError(
            "unexpected character %r" % c,
            span=span(start_col, 1),
            expected=["identifier", "number", "string", "{", "}"])

    toks.append(_Token("EOF", "", None, SourceSpan(line, col, 1)))
    return toks


# --- field tree ----------------------------------------------------------------

class _Cursor:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0

    def peek(self):
        return self.toks[self.pos]

    def take(self):
        t = self.toks[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t


def _parse_fields(cur, depth, stop_at_brace, open_span=None):
    fields = []
    while True:
        t = cur.peek()
        if t.kind == "EOF":
            if stop_at_brace:
                # point at the brace that was never balanced, not at EOF
                raise ParseError(
                    "block opened here is never closed",
                    span=open_span or t.span, expected=["}"])
            return fields
        if t.kind == "}":
            if stop_at_brace:
                cur.take()
                return fields
            raise ParseError(
                "unmatched '}'", span=t.span, expected=["identifier"])
        if t.kind != "IDENT":
            raise ParseError(
                "expected a field name, found %r" % t.text,
                span=t.span, expected=["identifier"])
        key_tok = cur.take()
        t = cur.peek()
        if t.kind == ":":
            cur.take()
            t = cur.peek()
            if t.kind == "{":
                fields.append(_parse_block(cur, key_tok, depth))
            elif t.kind in ("NUMBER", "STRING"):
                v = cur.take()
                fields.append(RawField(key_tok.text, v.value, span=v.span))
            elif t.kind == "IDENT":
                v = cur.take()
                fields.append(RawField(key_tok.text, Bare(v.value), span=v.span))
            else:
                raise ParseError(
                    "field %r has no value" % key_tok.text,
                    span=t.span, expected=["number", "string", "identifier", "{"])
        elif t.kind == "{":
            fields.append(_parse_block(cur, key_tok, depth))
        else:
            raise ParseError(
                "expected ':' or '{' after field name %r" % key_tok.text,
                span=t.span, expected=[":", "{"])


def _parse_block(cur, key_tok, depth):
    if depth + 1 > MAX_NESTING:
        raise ParseError(
            "blocks nested deeper than %d levels" % MAX_NESTING,
            span=cur.peek().span)
    brace = cur.take()  # '{'
    inner = _parse_fields(cur, depth + 1, stop_at_brace=True,
                          open_span=brace.span)
    return RawField(key_tok.text, inner, is_block=True, span=key_tok.span)


# --- interpretation ------------------------------------------------------------

_TYPE_TO_KIND = {
    "Data": ir.KIND_DATA,
    "Input": ir.KIND_DATA,
    "Convolution": ir.KIND_CONV,
    "InnerProduct": ir.KIND_INNER_PRODUCT,
    "Pooling": ir.KIND_POOLING,
    "ReLU": ir.KIND_RELU,
    "Concat": ir.KIND_CONCAT,
    "Dropout": ir.KIND_DROPOUT,
    "Softmax": ir.KIND_SOFTMAX,
}

# Geometry modifiers outside the supported envelope: silently keeping them
# as annotations would change layer semantics, so they are hard errors.
_REJECTED_GEOMETRY = (
    "kernel_h", "kernel_w", "stride_h", "stride_w", "pad_h", "pad_w",
)

_POOL_ENUM = {"MAX": ir.POOL_MAX, "AVE": ir.POOL_AVE, 0: ir.POOL_MAX, 1: ir.POOL_AVE}


def _want_int(f):
    if isinstance(f.value, bool) or not isinstance(f.value, int):
        raise ParseError(
            "field %r wants an integer, got %r" % (f.key, f.value),
            span=f.span, expected=["integer"])
    return f.value


def _want_number(f):
    if isinstance(f.value, (int, float)) and not isinstance(f.value, bool):
        return f.value
    raise ParseError(
        "field %r wants a number, got %r" % (f.key, f.value),
        span=f.span, expected=["number"])


def _want_string(f):
    if not isinstance(f.value, str):
        raise ParseError(
            "field %r wants a quoted string" % f.key,
            span=f.span, expected=["string"])
    return f.value


def _want_bool(f):
    if isinstance(f.value, Bare) and f.value.text in ("true", "false"):
        return f.value.text == "true"
    if isinstance(f.value, int) and f.value in (0, 1):
        return bool(f.value)
    raise ParseError(
        "field %r wants true or false" % f.key,
        span=f.span, expected=["true", "false"])


def _split_fields(fields, known_keys):
    """Partition a field list into {key: [fields]} for known keys + extras."""
    known = {}
    extras = []
    for f in fields:
        if f.key in known_keys:
            known.setdefault(f.key, []).append(f)
        else:
            extras.append(f)
    return known, extras


def _merge_blocks(field_list, key):
    """Concatenate the bodies of repeated blocks named ``key``."""
    body = []
    for f in field_list:
        if not f.is_block:
            raise ParseError(
                "field %r must be a block" % key, span=f.span, expected=["{"])
        body.extend(f.value)
    return body


def _conv_params(body, layer_name):
    known, extras = _split_fields(
        body, {"num_output", "kernel_size", "stride", "pad",
               "group", "dilation"} | set(_REJECTED_GEOMETRY))
    for bad in _REJECTED_GEOMETRY:
        if bad in known:
            raise UnsupportedLayer(
                "layer %r uses %s; only square kernels with uniform stride "
                "and padding are supported" % (layer_name, bad),
                layer=layer_name)
    for key, neutral in (("group", 1), ("dilation", 1)):
        for f in known.get(key, []):
            if _want_int(f) != neutral:
                raise UnsupportedLayer(
                    "layer %r uses %s=%d; unsupported" % (layer_name, key, f.value),
                    layer=layer_name)
    if "num_output" not in known or "kernel_size" not in known:
        raise ParseError(
            "layer %r: convolution_param needs num_output and kernel_size"
            % layer_name,
            expected=["num_output", "kernel_size"])
    p = ir.ConvParams(
        num_output=_want_int(known["num_output"][-1]),
        kernel=_want_int(known["kernel_size"][-1]),
        stride=_want_int(known["stride"][-1]) if "stride" in known else 1,
        pad=_want_int(known["pad"][-1]) if "pad" in known else 0,
    )
    return p, extras


def _pool_params(body, layer_name):
    known, extras = _split_fields(
        body, {"pool", "kernel_size", "stride", "pad", "global_pooling"})
    op = ir.POOL_MAX
    if "pool" in known:
        f = known["pool"][-1]
        raw = f.value.text if isinstance(f.value, Bare) else f.value
        if raw not in _POOL_ENUM:
            raise UnsupportedLayer(
                "layer %r: pooling mode %r unsupported" % (layer_name, raw),
                layer=layer_name)
        op = _POOL_ENUM[raw]
    p = ir.PoolParams(
        op=op,
        kernel=_want_int(known["kernel_size"][-1]) if "kernel_size" in known else 0,
        stride=_want_int(known["stride"][-1]) if "stride" in known else 1,
        pad=_want_int(known["pad"][-1]) if "pad" in known else 0,
        global_pool=_want_bool(known["global_pooling"][-1])
        if "global_pooling" in known else False,
    )
    if not p.global_pool and p.kernel < 1:
        raise ParseError(
            "layer %r: pooling needs kernel_size or global_pooling" % layer_name,
            expected=["kernel_size", "global_pooling"])
    return p, extras


def _input_shape(body, layer_name):
    known, extras = _split_fields(body, {"shape"})
    if "shape" not in known:
        raise ParseError(
            "layer %r: input_param needs a shape block" % layer_name,
            expected=["shape"])
    dims = []
    for f in _merge_blocks(known["shape"], "shape"):
        if f.key == "dim":
            dims.append(_want_int(f))
        else:
            extras.append(f)
    if len(dims) == 4:
        if dims[0] != 1:
            raise ParseError(
                "layer %r: batch dim must be 1, got %d" % (layer_name, dims[0]))
        dims = dims[1:]
    if len(dims) != 3:
        raise ParseError(
            "layer %r: shape wants 3 dims (or 4 with leading batch 1), got %d"
            % (layer_name, len(dims)))
    return ir.TensorShape(*dims), extras


def _build_layer(body):
    known, extras = _split_fields(
        body,
        {"name", "type", "bottom", "top", "convolution_param", "pooling_param",
         "dropout_param", "inner_product_param", "input_param"})
    if "name" not in known:
        raise ParseError("layer block without a name", expected=["name"])
    name = _want_string(known["name"][-1])
    if "type" not in known:
        raise ParseError("layer %r has no type" % name, expected=["type"])
    type_str = _want_string(known["type"][-1])
    if type_str not in _TYPE_TO_KIND:
        raise UnsupportedLayer(
            "layer %r has unsupported type %r" % (name, type_str),
            layer=name, kind=type_str)
    kind = _TYPE_TO_KIND[type_str]

    bottoms = [_want_string(f) for f in known.get("bottom", [])]
    tops = [_want_string(f) for f in known.get("top", [])]
    if len(tops) > 1:
        raise UnsupportedLayer(
            "layer %r declares %d tops; layers write exactly one blob"
            % (name, len(tops)),
            layer=name)
    top = tops[0] if tops else name

    spec = ir.LayerSpec(name=name, kind=kind, bottoms=bottoms, top=top)

    if kind == ir.KIND_CONV:
        if "convolution_param" not in known:
            raise ParseError(
                "layer %r: convolution without convolution_param" % name,
                expected=["convolution_param"])
        spec.conv, inner_extras = _conv_params(
            _merge_blocks(known["convolution_param"], "convolution_param"), name)
        if inner_extras:
            extras.append(RawField("convolution_param", inner_extras, is_block=True))
    elif kind == ir.KIND_POOLING:
        if "pooling_param" not in known:
            raise ParseError(
                "layer %r: pooling without pooling_param" % name,
                expected=["pooling_param"])
        spec.pool, inner_extras = _pool_params(
            _merge_blocks(known["pooling_param"], "pooling_param"), name)
        if inner_extras:
            extras.append(RawField("pooling_param", inner_extras, is_block=True))
    elif kind == ir.KIND_INNER_PRODUCT:
        if "inner_product_param" not in known:
            raise ParseError(
                "layer %r: inner product without inner_product_param" % name,
                expected=["inner_product_param"])
        body2 = _merge_blocks(known["inner_product_param"], "inner_product_param")
        k2, inner_extras = _split_fields(body2, {"num_output"})
        if "num_output" not in k2:
            raise ParseError(
                "layer %r: inner_product_param needs num_output" % name,
                expected=["num_output"])
        spec.num_output = _want_int(k2["num_output"][-1])
        if inner_extras:
            extras.append(RawField("inner_product_param", inner_extras, is_block=True))
    elif kind == ir.KIND_DROPOUT:
        if "dropout_param" in known:
            body2 = _merge_blocks(known["dropout_param"], "dropout_param")
            k2, inner_extras = _split_fields(body2, {"dropout_ratio"})
            if "dropout_ratio" in k2:
                spec.dropout_ratio = float(_want_number(k2["dropout_ratio"][-1]))
            if inner_extras:
                extras.append(RawField("dropout_param", inner_extras, is_block=True))
    elif kind == ir.KIND_DATA:
        if "input_param" in known:
            spec.input_shape, inner_extras = _input_shape(
                _merge_blocks(known["input_param"], "input_param"), name)
            if inner_extras:
                extras.append(RawField("input_param", inner_extras, is_block=True))

    spec.extras = extras
    return spec


def parse(text):
    """Parse a text-format description into a NetworkGraph."""
    if not isinstance(text, str):
        raise ParseError("expected text input")
    cur = _Cursor(_tokenize(text))
    fields = _parse_fields(cur, 0, stop_at_brace=False)

    net_name = ""
    layers = []
    extras = []
    legacy_inputs = []
    legacy_dims = []

    for f in fields:
        if f.key == "layers":
            raise ParseError(
                "legacy 'layers' blocks (enum-typed v1 format) are not "
                "supported; use 'layer' blocks with quoted type names",
                span=f.span)
        if f.key == "layer":
            if not f.is_block:
                raise ParseError(
                    "'layer' must be a block", span=f.span, expected=["{"])
            layers.append(_build_layer(f.value))
        elif f.key == "name" and not f.is_block:
            net_name = _want_string(f)
        elif f.key == "input" and not f.is_block:
            legacy_inputs.append(_want_string(f))
        elif f.key == "input_dim" and not f.is_block:
            legacy_dims.append((_want_int(f), f.span))
        else:
            extras.append(f)

    if legacy_inputs or legacy_dims:
        if len(legacy_inputs) != 1:
            raise ParseError(
                "exactly one top-level input is supported, got %d"
                % len(legacy_inputs))
        if len(legacy_dims) != 4:
            span = legacy_dims[-1][1] if legacy_dims else None
            raise ParseError(
                "top-level input wants exactly 4 input_dim values, got %d"
                % len(legacy_dims), span=span)
        dims = [d for d, _ in legacy_dims]
        if dims[0] != 1:
            raise ParseError("input_dim batch must be 1, got %d" % dims[0],
                             span=legacy_dims[0][1])
        data = ir.LayerSpec(
            name=legacy_inputs[0], kind=ir.KIND_DATA,
            top=legacy_inputs[0],
            input_shape=ir.TensorShape(dims[1], dims[2], dims[3]))
        layers.insert(0, data)

    seen = set()
    for l in layers:
        if l.name in seen:
            raise DuplicateLayerName("layer name %r appears twice" % l.name)
        seen.add(l.name)

    return ir.NetworkGraph(name=net_name, layers=layers, extras=extras)


def parse_bytes(data):
    """Decode UTF-8 bytes and parse; bad encodings are ParseErrors."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError("input is not valid UTF-8 (byte offset %d)" % e.start)
    return parse(text)


# --- serialization --------------------------------------------------------------

def _quote(s):
    out = s.replace("\\", "\\\\").replace('"', '\\"')
    out = out.replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
    return '"%s"' % out


def _fmt_scalar(v):
    if isinstance(v, Bare):
        return v.text
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return _quote(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _emit_raw(f, lines, indent):
    pad = "  " * indent
    if f.is_block:
        lines.append("%s%s {" % (pad, f.key))
        for inner in f.value:
            _emit_raw(inner, lines, indent + 1)
        lines.append("%s}" % pad)
    else:
        lines.append("%s%s: %s" % (pad, f.key, _fmt_scalar(f.value)))


_KIND_TO_TYPE = {v: k for k, v in _TYPE_TO_KIND.items() if k != "Input"}


def serialize(graph):
    """Render a NetworkGraph back to text format (canonical field order)."""
    lines = []
    if graph.name:
        lines.append("name: %s" % _quote(graph.name))
    for f in graph.extras:
        _emit_raw(f, lines, 0)
    for l in graph.layers:
        lines.append("layer {")
        lines.append("  name: %s" % _quote(l.name))
        lines.append("  type: %s" % _quote(_KIND_TO_TYPE[l.kind]))
        for b in l.bottoms:
            lines.append("  bottom: %s" % _quote(b))
        lines.append("  top: %s" % _quote(l.top))
        if l.kind == ir.KIND_CONV and l.conv is not None:
            p = l.conv
            lines.append("  convolution_param {")
            lines.append("    num_output: %d" % p.num_output)
            lines.append("    kernel_size: %d" % p.kernel)
            if p.stride != 1:
                lines.append("    stride: %d" % p.stride)
            if p.pad != 0:
                lines.append("    pad: %d" % p.pad)
            lines.append("  }")
        elif l.kind == ir.KIND_POOLING and l.pool is not None:
            p = l.pool
            lines.append("  pooling_param {")
            lines.append("    pool: %s" % p.op)
            if p.global_pool:
                lines.append("    global_pooling: true")
            else:
                lines.append("    kernel_size: %d" % p.kernel)
                if p.stride != 1:
                    lines.append("    stride: %d" % p.stride)
                if p.pad != 0:
                    lines.append("    pad: %d" % p.pad)
            lines.append("  }")
        elif l.kind == ir.KIND_INNER_PRODUCT:
            lines.append("  inner_product_param {")
            lines.append("    num_output: %d" % l.num_output)
            lines.append("  }")
        elif l.kind == ir.KIND_DROPOUT:
            lines.append("  dropout_param {")
            lines.append("    dropout_ratio: %s" % _fmt_scalar(l.dropout_ratio))
            lines.append("  }")
        elif l.kind == ir.KIND_DATA and l.input_shape is not None:
            s = l.input_shape
            lines.append("  input_param {")
            lines.append("    shape {")
            for d in (1, s.ch, s.h, s.w):
                lines.append("      dim: %d" % d)
            lines.append("    }")
            lines.append("  }")
        for f in l.extras:
            _emit_raw(f, lines, 1)
        lines.append("}")
    return "\n".join(lines) + "\n"
