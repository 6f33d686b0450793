"""Generic scalar-multiplication helpers shared by the curve backends.

All functions work on backend-native coordinate objects through the supplied
`add`/`dbl` callables, so each backend keeps its own point representation.
"""

from __future__ import annotations


def window_mul(k, point, add, dbl, identity):
    """Fixed 4-bit window multiplication for a one-off variable base."""
    if k == 0:
        return identity
    tbl = [identity, point]
    for _ in range(14):
        tbl.append(add(tbl[-1], point))
    nibbles = []
    while k:
        nibbles.append(k & 15)
        k >>= 4
    acc = tbl[nibbles[-1]]
    for nib in reversed(nibbles[:-1]):
        acc = dbl(dbl(dbl(dbl(acc))))
        if nib:
            acc = add(acc, tbl[nib])
    return acc


def comb_table(point, add, bits, width=4):
    """Precompute per-window multiples of a fixed base.

    tables[i][j] = j * 16^i * point; build cost ~(bits/width)*16 additions.
    """
    windows = (bits + width - 1) // width
    tables = []
    cur = point
    for _ in range(windows):
        row = [None, cur]
        for _ in range(2**width - 2):
            row.append(add(row[-1], cur))
        tables.append(row)
        cur = add(row[-1], cur)  # 16 * cur
    return tables


def comb_mul(k, tables, add, identity, width=4):
    """Multiply using a `comb_table`; one table addition per nonzero window."""
    acc = identity
    i = 0
    mask = (1 << width) - 1
    while k:
        w = k & mask
        if w:
            acc = add(acc, tables[i][w])
        k >>= width
        i += 1
    return acc


def multi_scalar_mul(pairs, add, neg, identity, order):
    """sum(k_i * P_i): Straus interleaving for few terms, Pippenger buckets
    for many.

    `pairs` is a list of (int scalar, native point).
    """
    pairs = [(k % order, p) for k, p in pairs]
    pairs = [(k, p) for k, p in pairs if k]
    if not pairs:
        return identity
    if len(pairs) == 1:
        k, p = pairs[0]
        return window_mul(k, p, add, lambda q: add(q, q), identity)
    if len(pairs) <= 192:
        return _straus(pairs, add, identity)
    return _pippenger(pairs, add, identity)


def _straus(pairs, add, identity):
    """Shared doubling chain, one 4-bit table per point."""
    tables = []
    bits = 0
    for k, p in pairs:
        row = [None, p]
        for _ in range(14):
            row.append(add(row[-1], p))
        tables.append((k, row))
        bits = max(bits, k.bit_length())
    nwin = (bits + 3) // 4
    acc = identity
    for w in range(nwin - 1, -1, -1):
        if w != nwin - 1:
            for _ in range(4):
                acc = add(acc, acc)
        shift = 4 * w
        for k, row in tables:
            digit = (k >> shift) & 15
            if digit:
                acc = add(acc, row[digit])
    return acc


def _pippenger(pairs, add, identity):
    m = len(pairs)
    c = 8 if m > 384 else 6
    bits = max(k.bit_length() for k, _ in pairs)
    nwin = (bits + c - 1) // c
    mask = (1 << c) - 1
    result = identity
    for w in range(nwin - 1, -1, -1):
        if result is not identity:
            for _ in range(c):
                result = add(result, result)
        buckets = [identity] * (mask + 1)
        shift = w * c
        for k, p in pairs:
            digit = (k >> shift) & mask
            if digit:
                buckets[digit] = add(buckets[digit], p)
        running = identity
        acc = identity
        for b in range(mask, 0, -1):
            running = add(running, buckets[b])
            acc = add(acc, running)
        result = add(result, acc)
    return result
