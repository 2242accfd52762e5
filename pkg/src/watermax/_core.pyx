# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scoring kernels: bit-compatible twin of watermax._corepy.

SHA-256 comes from OpenSSL libcrypto, the SplitMix64 mixing and the AS241
inverse-normal polynomial are transcribed operation for operation from the
pure backend, and the extension is compiled with -ffp-contract=off, so both
backends produce identical bits on the same platform.
"""

from libc.math cimport erfc, fabs, ldexp, log, sqrt
from libc.stdint cimport int32_t, uint8_t, uint64_t
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy, memmove
from libcpp.unordered_set cimport unordered_set

import numpy as np

BACKEND_NAME = "compiled"

SCHEME_GAUSSIAN = 0
SCHEME_KGW = 1
SCHEME_AARONSON = 2

GOLDEN = 0x9E3779B97F4A7C15

cdef extern from "openssl/evp.h" nogil:
    ctypedef struct EVP_MD
    ctypedef struct EVP_MD_CTX
    const EVP_MD *EVP_sha256()
    EVP_MD_CTX *EVP_MD_CTX_new()
    void EVP_MD_CTX_free(EVP_MD_CTX *ctx)
    int EVP_DigestInit_ex(EVP_MD_CTX *ctx, const EVP_MD *type, void *impl)
    int EVP_DigestUpdate(EVP_MD_CTX *ctx, const void *d, size_t cnt)
    int EVP_DigestFinal_ex(EVP_MD_CTX *ctx, unsigned char *md, unsigned int *s)

cdef const EVP_MD *_MD_SHA256 = EVP_sha256()

cdef uint64_t _GOLDEN = 0x9E3779B97F4A7C15
cdef uint64_t _MIX1 = 0xBF58476D1CE4E5B9
cdef uint64_t _MIX2 = 0x94D049BB133111EB
cdef double _UNIT53 = ldexp(1.0, -53)
cdef double _SQRT2 = sqrt(2.0)


cdef inline uint64_t c_mix64(uint64_t x) noexcept nogil:
    x ^= x >> 30
    x *= _MIX1
    x ^= x >> 27
    x *= _MIX2
    x ^= x >> 31
    return x


cdef inline double c_uniform_for_seed(uint64_t seed) noexcept nogil:
    cdef uint64_t z = c_mix64(seed + _GOLDEN)
    return (<double>(z >> 11) + 0.5) * _UNIT53


cdef double c_ndtri(double p) noexcept nogil:
    # AS241 rational approximation; keep literals and operation order in
    # sync with watermax.special.ndtri.
    cdef double q, r, num, den, val
    q = p - 0.5
    if fabs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r
                    + 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r
                  + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r
                + 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0)
        den = (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r
                    + 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r
                  + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r
                + 4.2313330701600911252e+1) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = sqrt(-log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r
                  + 3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r
                + 4.63033784615654529590e+0) * r + 1.42343711074968357734e+0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r
                + 2.05319162663775882187e+0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r
                + 5.46378491116411436990e+0) * r + 6.65790464350110377720e+0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


cdef inline double c_value(double u, int scheme, double gamma) noexcept nogil:
    # scheme codes: 0 gaussian, 1 kgw, 2 aaronson (module-level names)
    if scheme == 0:
        return c_ndtri(u)
    if scheme == 1:
        return 1.0 if u < gamma else 0.0
    return -log(u)


cdef inline uint64_t c_digest64(EVP_MD_CTX *ctx, const unsigned char *buf,
                                size_t n) noexcept nogil:
    cdef unsigned char dg[32]
    cdef unsigned int dlen = 0
    EVP_DigestInit_ex(ctx, _MD_SHA256, NULL)
    EVP_DigestUpdate(ctx, buf, n)
    EVP_DigestFinal_ex(ctx, dg, &dlen)
    return (<uint64_t>dg[0]
            | (<uint64_t>dg[1] << 8)
            | (<uint64_t>dg[2] << 16)
            | (<uint64_t>dg[3] << 24)
            | (<uint64_t>dg[4] << 32)
            | (<uint64_t>dg[5] << 40)
            | (<uint64_t>dg[6] << 48)
            | (<uint64_t>dg[7] << 56))


cdef inline void c_store_le32(unsigned char *dst, int32_t t) noexcept nogil:
    dst[0] = <unsigned char>(t & 0xFF)
    dst[1] = <unsigned char>((t >> 8) & 0xFF)
    dst[2] = <unsigned char>((t >> 16) & 0xFF)
    dst[3] = <unsigned char>((t >> 24) & 0xFF)


def mix64(seed):
    """SplitMix64 output mixing of a 64-bit state value."""
    return c_mix64(<uint64_t>seed)


def uniform_for_seed(seed):
    """First SplitMix64 uniform of the stream seeded by ``seed``, in (0, 1)."""
    return c_uniform_for_seed(<uint64_t>seed)


def uniform_for_counter(seed, counter):
    """Counter-indexed uniform: draw ``counter`` of the stream, in (0, 1)."""
    cdef uint64_t s = <uint64_t>seed
    cdef uint64_t c = <uint64_t>counter
    cdef uint64_t z = c_mix64(s + (c + 1) * _GOLDEN)
    return (<double>(z >> 11) + 0.5) * _UNIT53


def ndtri(p):
    """Inverse standard normal CDF (AS241), matching watermax.special.ndtri."""
    cdef double pp = p
    if pp < 0.0 or pp > 1.0 or pp != pp:
        raise ValueError(f"probability out of range: {p!r}")
    if pp == 0.0:
        return -float("inf")
    if pp == 1.0:
        return float("inf")
    return c_ndtri(pp)


def seed_for(key, gram):
    """64-bit seed for one h-gram: SHA-256(key || tokens as 4-byte LE), first 8 bytes."""
    cdef bytes kb = bytes(key)
    arr = np.ascontiguousarray(gram, dtype=np.int32)
    if arr.ndim != 1:
        raise ValueError("gram must be one-dimensional")
    cdef bytes payload = kb + arr.tobytes()
    cdef const unsigned char *p = payload
    cdef EVP_MD_CTX *ctx = EVP_MD_CTX_new()
    try:
        return c_digest64(ctx, p, len(payload))
    finally:
        EVP_MD_CTX_free(ctx)


def gram_seeds(key, grams):
    """Seeds for a (B, h) batch of h-grams, as uint64."""
    cdef bytes kb = bytes(key)
    arr = np.ascontiguousarray(grams, dtype=np.int32)
    if arr.ndim != 2:
        raise ValueError("grams must be two-dimensional")
    cdef int32_t[:, ::1] g = arr
    cdef Py_ssize_t batch = g.shape[0]
    cdef Py_ssize_t h = g.shape[1]
    out = np.empty(batch, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    cdef size_t keylen = len(kb)
    cdef unsigned char *buf = <unsigned char *>malloc(keylen + 4 * h)
    if buf == NULL:
        raise MemoryError
    cdef EVP_MD_CTX *ctx = EVP_MD_CTX_new()
    cdef Py_ssize_t i, j
    try:
        memcpy(buf, <const unsigned char *>kb, keylen)
        for i in range(batch):
            for j in range(h):
                c_store_le32(buf + keylen + 4 * j, g[i, j])
            o[i] = c_digest64(ctx, buf, keylen + 4 * h)
    finally:
        EVP_MD_CTX_free(ctx)
        free(buf)
    return out


cdef class Session:
    """Sequential scoring state: dedup set, running score and effective length.

    Same contract as the pure-Python Session: a token at 0-based position j
    contributes once j >= h, through the window of the h tokens ending at j,
    unless the window's seed was already seen in this text.
    """

    cdef readonly bytes key
    cdef readonly int h
    cdef readonly int scheme
    cdef readonly double gamma
    cdef readonly long pos
    cdef readonly double s
    cdef readonly long leff
    cdef unordered_set[uint64_t] seen
    cdef unsigned char *buf
    cdef size_t keylen
    cdef EVP_MD_CTX *ctx

    def __cinit__(self, key, int h, int scheme, double gamma=0.5):
        if h < 1:
            raise ValueError(f"window must be >= 1: {h!r}")
        if scheme not in (SCHEME_GAUSSIAN, SCHEME_KGW, SCHEME_AARONSON):
            raise ValueError(f"unknown scheme code: {scheme!r}")
        self.key = bytes(key)
        self.h = h
        self.scheme = scheme
        self.gamma = gamma
        self.pos = 0
        self.s = 0.0
        self.leff = 0
        self.keylen = len(self.key)
        self.buf = <unsigned char *>malloc(self.keylen + 4 * h)
        if self.buf == NULL:
            raise MemoryError
        memcpy(self.buf, <const unsigned char *>self.key, self.keylen)
        self.ctx = EVP_MD_CTX_new()
        if self.ctx == NULL:
            raise MemoryError

    def __dealloc__(self):
        if self.buf != NULL:
            free(self.buf)
        if self.ctx != NULL:
            EVP_MD_CTX_free(self.ctx)

    def copy(self):
        cdef Session dup = Session(self.key, self.h, self.scheme, self.gamma)
        dup.pos = self.pos
        dup.s = self.s
        dup.leff = self.leff
        dup.seen = self.seen
        memcpy(dup.buf + dup.keylen, self.buf + self.keylen, 4 * self.h)
        return dup

    def feed(self, tokens):
        arr = np.ascontiguousarray(tokens, dtype=np.int32)
        if arr.ndim != 1:
            raise ValueError("tokens must be one-dimensional")
        if arr.size and int(arr.min()) < 0:
            raise ValueError("negative token id")
        cdef int32_t[::1] v = arr
        cdef Py_ssize_t n = v.shape[0]
        cdef int h = self.h
        cdef unsigned char *win = self.buf + self.keylen
        cdef size_t total = self.keylen + 4 * h
        cdef long pos = self.pos
        cdef double s = self.s
        cdef long leff = self.leff
        cdef Py_ssize_t i
        cdef uint64_t seed
        cdef double u
        for i in range(n):
            if h > 1:
                memmove(win, win + 4, 4 * (h - 1))
            c_store_le32(win + 4 * (h - 1), v[i])
            if pos >= h:
                seed = c_digest64(self.ctx, self.buf, total)
                if self.seen.insert(seed).second:
                    u = c_uniform_for_seed(seed)
                    s += c_value(u, self.scheme, self.gamma)
                    leff += 1
            pos += 1
        self.pos = pos
        self.s = s
        self.leff = leff

    def score_gram(self, gram):
        """Score one explicit h-gram against the dedup set, without feeding."""
        arr = np.ascontiguousarray(gram, dtype=np.int32)
        if arr.ndim != 1 or arr.shape[0] != self.h:
            raise ValueError(f"gram shape {arr.shape} does not match window {self.h}")
        cdef uint64_t seed = seed_for(self.key, arr)
        if not self.seen.insert(seed).second:
            return 0.0, False
        cdef double u = c_uniform_for_seed(seed)
        cdef double value = c_value(u, self.scheme, self.gamma)
        self.s += value
        self.leff += 1
        return value, True

    def seen_seeds(self):
        out = np.empty(self.seen.size(), dtype=np.uint64)
        cdef uint64_t[::1] o = out
        cdef Py_ssize_t i = 0
        cdef uint64_t sd
        for sd in self.seen:
            o[i] = sd
            i += 1
        out.sort()
        return out

    @property
    def seen_count(self):
        return self.seen.size()


def score_block(key, texts, int h, int scheme, double gamma=0.5):
    """Score a (B, L) batch of texts, one fresh session per row.

    Returns (values, contributing): non-contributing positions hold value 0,
    so row sums of ``values`` are the scores and row sums of ``contributing``
    the effective lengths.
    """
    if h < 1:
        raise ValueError(f"window must be >= 1: {h!r}")
    if scheme not in (SCHEME_GAUSSIAN, SCHEME_KGW, SCHEME_AARONSON):
        raise ValueError(f"unknown scheme code: {scheme!r}")
    cdef bytes kb = bytes(key)
    arr = np.ascontiguousarray(texts, dtype=np.int32)
    if arr.ndim != 2:
        raise ValueError("texts must be two-dimensional")
    if arr.size and int(arr.min()) < 0:
        raise ValueError("negative token id")
    cdef int32_t[:, ::1] t = arr
    cdef Py_ssize_t batch = t.shape[0]
    cdef Py_ssize_t length = t.shape[1]
    values = np.zeros((batch, length), dtype=np.float64)
    contrib = np.zeros((batch, length), dtype=np.uint8)
    cdef double[:, ::1] val = values
    cdef uint8_t[:, ::1] con = contrib
    cdef size_t keylen = len(kb)
    cdef size_t total = keylen + 4 * h
    cdef unsigned char *buf = <unsigned char *>malloc(total)
    if buf == NULL:
        raise MemoryError
    cdef EVP_MD_CTX *ctx = EVP_MD_CTX_new()
    cdef unordered_set[uint64_t] seen
    cdef Py_ssize_t b, j, k
    cdef uint64_t seed
    cdef double u
    try:
        memcpy(buf, <const unsigned char *>kb, keylen)
        for b in range(batch):
            seen.clear()
            for j in range(h, length):
                for k in range(h):
                    c_store_le32(buf + keylen + 4 * k, t[b, j - h + 1 + k])
                seed = c_digest64(ctx, buf, total)
                if seen.insert(seed).second:
                    u = c_uniform_for_seed(seed)
                    val[b, j] = c_value(u, scheme, gamma)
                    con[b, j] = 1
    finally:
        EVP_MD_CTX_free(ctx)
        free(buf)
    return values, contrib


def normal_cdf_block(x):
    """Elementwise standard normal CDF (same operations as special.normal_cdf)."""
    src = np.ascontiguousarray(x, dtype=np.float64)
    flat = src.ravel()
    out = np.empty(flat.shape[0], dtype=np.float64)
    cdef double[::1] xin = flat
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(xin.shape[0]):
        o[i] = 0.5 * erfc(-xin[i] / _SQRT2)
    return out.reshape(src.shape)
