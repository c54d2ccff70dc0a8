# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: comment-aware line counting and exact Shapley values.

Semantics mirror ``secbonus._purepy`` exactly; see ``secbonus.loc`` for the
lexing rules.
"""

from libc.stdlib cimport free, malloc

cdef enum:
    JAVA = 0
    KOTLIN = 1
    XML = 2

cdef enum:
    S_CODE
    S_LINE
    S_BLOCK
    S_DQ
    S_SQ
    S_TRIPLE
    S_XMLC


cdef inline bint _at(str text, Py_ssize_t i, Py_ssize_t n, Py_UCS4 a, Py_UCS4 b):
    return i + 1 < n and text[i] == a and text[i + 1] == b


cdef inline bint _triple(str text, Py_ssize_t i, Py_ssize_t n):
    return i + 2 < n and text[i] == u'"' and text[i + 1] == u'"' and text[i + 2] == u'"'


def count_code_lines(str text, int mode):
    cdef Py_ssize_t n = len(text)
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t counted = 0
    cdef int state = S_CODE
    cdef int depth = 0
    cdef bint line_has_code = False
    cdef bint nesting = mode == KOTLIN
    cdef Py_UCS4 c, quote = 0

    while i < n:
        c = text[i]
        if c == u'\n':
            if line_has_code:
                counted += 1
            line_has_code = False
            if state == S_LINE or state == S_DQ or state == S_SQ:
                state = S_CODE
            i += 1
            continue

        if mode == XML:
            if state == S_XMLC:
                if (i + 2 < n and c == u'-' and text[i + 1] == u'-'
                        and text[i + 2] == u'>'):
                    state = S_CODE
                    i += 3
                else:
                    i += 1
                continue
            if (i + 3 < n and c == u'<' and text[i + 1] == u'!'
                    and text[i + 2] == u'-' and text[i + 3] == u'-'):
                state = S_XMLC
                i += 4
                continue
            if not c.isspace():
                line_has_code = True
            i += 1
            continue

        if state == S_CODE:
            if _at(text, i, n, u'/', u'/'):
                state = S_LINE
                i += 2
            elif _at(text, i, n, u'/', u'*'):
                state = S_BLOCK
                depth = 1
                i += 2
            elif _triple(text, i, n):
                state = S_TRIPLE
                line_has_code = True
                i += 3
            elif c == u'"' or c == u"'":
                state = S_DQ if c == u'"' else S_SQ
                quote = c
                line_has_code = True
                i += 1
            else:
                if not c.isspace():
                    line_has_code = True
                i += 1
        elif state == S_LINE:
            i += 1
        elif state == S_BLOCK:
            if _at(text, i, n, u'*', u'/'):
                depth -= 1
                if depth == 0:
                    state = S_CODE
                i += 2
            elif nesting and _at(text, i, n, u'/', u'*'):
                depth += 1
                i += 2
            else:
                i += 1
        elif state == S_DQ or state == S_SQ:
            line_has_code = True
            if c == u'\\':
                # an escape never swallows the line break of a one-line literal
                if i + 1 < n and text[i + 1] != u'\n':
                    i += 2
                else:
                    i += 1
            elif c == quote:
                state = S_CODE
                i += 1
            else:
                i += 1
        else:  # S_TRIPLE
            if _triple(text, i, n):
                state = S_CODE
                line_has_code = True
                i += 3
            elif c == u'\\' and not nesting:
                line_has_code = True
                if i + 1 < n and text[i + 1] == u'\n':
                    counted += 1
                    line_has_code = False
                i += 2
            else:
                if not c.isspace():
                    line_has_code = True
                i += 1

    if line_has_code:
        counted += 1
    return counted


def shapley_values(values, int n):
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n
    cdef Py_ssize_t mask, bit
    cdef int i, s
    cdef double w, base
    cdef double *v = <double *>malloc(size * sizeof(double))
    cdef double *phi = <double *>malloc(n * sizeof(double))
    cdef double *weights = <double *>malloc((n + 1) * sizeof(double))
    if v == NULL or phi == NULL or weights == NULL:
        free(v)
        free(phi)
        free(weights)
        raise MemoryError()
    try:
        for mask in range(size):
            v[mask] = values[mask]
        for i in range(n):
            phi[i] = 0.0
        for s in range(n):
            weights[s] = _weight(s, n)
        weights[n] = 0.0
        for mask in range(size):
            w = weights[_popcount(mask)]
            base = v[mask]
            for i in range(n):
                bit = (<Py_ssize_t>1) << i
                if not (mask & bit):
                    phi[i] += w * (v[mask | bit] - base)
        return [phi[i] for i in range(n)]
    finally:
        free(v)
        free(phi)
        free(weights)


cdef inline int _popcount(Py_ssize_t x):
    cdef int c = 0
    while x:
        x &= x - 1
        c += 1
    return c


def _weight(int s, int n):
    # same float arithmetic as the pure-Python kernel: exact integer
    # factorials, one correctly rounded division
    from math import factorial
    return factorial(s) * factorial(n - 1 - s) / factorial(n)
