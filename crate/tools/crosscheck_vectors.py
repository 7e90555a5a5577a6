#!/usr/bin/env python3
"""Check the golden CBOR vectors against the cbor2 decoder.

Each line of the vector file is ``<hex> <diagnostic>``. The diagnostic is
parsed here into Python values and compared with ``cbor2.loads`` of the hex.

    python3 tools/crosscheck_vectors.py crates/tinyfl/tests/data/cbor_vectors.txt
"""

import math
import struct
import sys
import uuid

import cbor2


class Diag:
    def __init__(self, text):
        self.s = text
        self.i = 0

    def peek(self):
        return self.s[self.i] if self.i < len(self.s) else ""

    def expect(self, tok):
        if not self.s.startswith(tok, self.i):
            raise ValueError(f"expected {tok!r} at {self.i} in {self.s!r}")
        self.i += len(tok)

    def skip_ws(self):
        while self.peek() == " ":
            self.i += 1

    def value(self):
        c = self.peek()
        if c == "[":
            self.i += 1
            items = []
            self.skip_ws()
            if self.peek() == "]":
                self.i += 1
                return items
            while True:
                items.append(self.value())
                self.skip_ws()
                if self.peek() == ",":
                    self.i += 1
                    self.skip_ws()
                    continue
                self.expect("]")
                return items
        if c == '"':
            return self.text()
        if self.s.startswith("h'", self.i):
            self.i += 2
            end = self.s.index("'", self.i)
            b = bytes.fromhex(self.s[self.i:end])
            self.i = end + 1
            return b
        for word, v in (("true", True), ("false", False)):
            if self.s.startswith(word, self.i):
                self.i += len(word)
                return v
        return self.number()

    def text(self):
        self.expect('"')
        out = []
        while True:
            c = self.s[self.i]
            self.i += 1
            if c == '"':
                return "".join(out)
            if c == "\\":
                e = self.s[self.i]
                self.i += 1
                if e == "u":
                    out.append(chr(int(self.s[self.i:self.i + 4], 16)))
                    self.i += 4
                else:
                    out.append(e)
            else:
                out.append(c)

    def number(self):
        start = self.i
        while self.peek() and self.peek() not in ",]() ":
            self.i += 1
        tok = self.s[start:self.i]
        if "_" in tok:
            num, width = tok.rsplit("_", 1)
            x = {"NaN": math.nan, "Infinity": math.inf, "-Infinity": -math.inf}.get(num)
            return Float(float(num) if x is None else x, int(width))
        n = int(tok)
        if self.peek() == "(":
            self.i += 1
            inner = self.value()
            self.expect(")")
            return Tag(n, inner)
        return n


class Float:
    def __init__(self, x, width):
        self.x = x
        self.width = width


class Tag:
    def __init__(self, tag, value):
        self.tag = tag
        self.value = value


def same(expected, got):
    if isinstance(expected, Float):
        if not isinstance(got, float):
            return False
        if math.isnan(expected.x):
            return math.isnan(got)
        return struct.pack(">d", expected.x) == struct.pack(">d", got)
    if isinstance(expected, Tag):
        if expected.tag == 37 and isinstance(got, uuid.UUID):
            return expected.value == got.bytes
        return (
            isinstance(got, cbor2.CBORTag)
            and got.tag == expected.tag
            and same(expected.value, got.value)
        )
    if isinstance(expected, list):
        # cbor2 returns arrays under a tag as tuples
        return (
            isinstance(got, (list, tuple))
            and len(got) == len(expected)
            and all(same(a, b) for a, b in zip(expected, got))
        )
    if isinstance(expected, bool):
        return got is expected
    if isinstance(expected, int):
        return type(got) is int and got == expected
    return type(got) is type(expected) and got == expected


# initial byte of each float width indicator
FLOAT_HEADS = {1: 0xF9, 2: 0xFA, 3: 0xFB}


def width_of_top_float(expected, raw):
    return not isinstance(expected, Float) or raw[0] == FLOAT_HEADS[expected.width]


def main(path):
    failures = 0
    count = 0
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            count += 1
            hex_part, diag = line.split(" ", 1)
            raw = bytes.fromhex(hex_part)
            p = Diag(diag)
            expected = p.value()
            if p.i != len(diag):
                print(f"line {lineno}: trailing diagnostic text")
                failures += 1
                continue
            got = cbor2.loads(raw)
            if not same(expected, got) or not width_of_top_float(expected, raw):
                print(f"line {lineno}: cbor2 gives {got!r} for {diag}")
                failures += 1
    print(f"{count} vectors, {failures} mismatches")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1] if len(sys.argv) > 1 else "crates/tinyfl/tests/data/cbor_vectors.txt"))
