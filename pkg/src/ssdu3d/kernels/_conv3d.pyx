# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled 3x3x3 convolution kernels (stride 1, zero padding 1).

The heavy arithmetic is one BLAS GEMM per call; Cython supplies the
im2col gather / col2im scatter that NumPy cannot do at memory speed.
"""

import threading

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"

_scratch = threading.local()


def _cols_buffer(Py_ssize_t rows, Py_ssize_t cols):
    # Reuse one scratch matrix per thread; repeated multi-MB allocations are
    # page-fault bound in sandboxed environments.
    buf = getattr(_scratch, "cols", None)
    if buf is None or buf.shape[0] < rows or buf.shape[1] != cols:
        buf = np.empty((rows, cols), dtype=np.float64)
        _scratch.cols = buf
    return buf[:rows]


cdef void _im2col(double[:, :, :, ::1] inp, double[:, ::1] cols) noexcept nogil:
    # cols[(i*27 + kx*9 + ky*3 + kz), n] for n = flat (x, y, z)
    cdef Py_ssize_t ci = inp.shape[0], nx = inp.shape[1], ny = inp.shape[2], nz = inp.shape[3]
    cdef Py_ssize_t i, kx, ky, kz, x, y, z, sx, sy, sz, row, n
    for i in range(ci):
        for kx in range(3):
            for ky in range(3):
                for kz in range(3):
                    row = i * 27 + kx * 9 + ky * 3 + kz
                    n = 0
                    for x in range(nx):
                        sx = x + kx - 1
                        for y in range(ny):
                            sy = y + ky - 1
                            if sx < 0 or sx >= nx or sy < 0 or sy >= ny:
                                for z in range(nz):
                                    cols[row, n] = 0.0
                                    n += 1
                                continue
                            for z in range(nz):
                                sz = z + kz - 1
                                if sz < 0 or sz >= nz:
                                    cols[row, n] = 0.0
                                else:
                                    cols[row, n] = inp[i, sx, sy, sz]
                                n += 1


cdef void _col2im_add(double[:, ::1] cols, double[:, :, :, ::1] out) noexcept nogil:
    cdef Py_ssize_t ci = out.shape[0], nx = out.shape[1], ny = out.shape[2], nz = out.shape[3]
    cdef Py_ssize_t i, kx, ky, kz, x, y, z, sx, sy, sz, row, n
    for i in range(ci):
        for kx in range(3):
            for ky in range(3):
                for kz in range(3):
                    row = i * 27 + kx * 9 + ky * 3 + kz
                    n = 0
                    for x in range(nx):
                        sx = x + kx - 1
                        if sx < 0 or sx >= nx:
                            n += ny * nz
                            continue
                        for y in range(ny):
                            sy = y + ky - 1
                            if sy < 0 or sy >= ny:
                                n += nz
                                continue
                            for z in range(nz):
                                sz = z + kz - 1
                                if 0 <= sz < nz:
                                    out[i, sx, sy, sz] += cols[row, n]
                                n += 1


def conv3d_forward(double[:, :, :, ::1] inp, double[:, :, :, :, ::1] weight,
                   double[::1] bias):
    cdef Py_ssize_t ci = inp.shape[0], nx = inp.shape[1], ny = inp.shape[2], nz = inp.shape[3]
    cdef Py_ssize_t co = weight.shape[0]
    cols = _cols_buffer(ci * 27, nx * ny * nz)
    cdef double[:, ::1] cols_mv = cols
    with nogil:
        _im2col(inp, cols_mv)
    w2 = np.asarray(weight).reshape(co, ci * 27)
    out = w2 @ cols
    out += np.asarray(bias)[:, None]
    return np.ascontiguousarray(out.reshape(co, nx, ny, nz))


def conv3d_backward_input(double[:, :, :, ::1] grad_out, double[:, :, :, :, ::1] weight):
    cdef Py_ssize_t co = grad_out.shape[0], ci = weight.shape[1]
    cdef Py_ssize_t nx = grad_out.shape[1], ny = grad_out.shape[2], nz = grad_out.shape[3]
    g2 = np.asarray(grad_out).reshape(co, nx * ny * nz)
    w2 = np.asarray(weight).reshape(co, ci * 27)
    gcols = np.ascontiguousarray(w2.T @ g2)
    gin = np.zeros((ci, nx, ny, nz), dtype=np.float64)
    cdef double[:, ::1] gcols_mv = gcols
    cdef double[:, :, :, ::1] gin_mv = gin
    with nogil:
        _col2im_add(gcols_mv, gin_mv)
    return gin


def conv3d_backward_weight(double[:, :, :, ::1] inp, double[:, :, :, ::1] grad_out):
    cdef Py_ssize_t ci = inp.shape[0], nx = inp.shape[1], ny = inp.shape[2], nz = inp.shape[3]
    cdef Py_ssize_t co = grad_out.shape[0]
    cols = np.empty((ci * 27, nx * ny * nz), dtype=np.float64)
    cdef double[:, ::1] cols_mv = cols
    with nogil:
        _im2col(inp, cols_mv)
    g2 = np.asarray(grad_out).reshape(co, nx * ny * nz)
    gw = (g2 @ cols.T).reshape(co, ci, 3, 3, 3)
    gb = g2.sum(axis=1)
    return gw, gb
