#ifndef DLROM_H
#define DLROM_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DlromStatus {
  DLROM_STATUS_OK = 0,
  DLROM_STATUS_NULL_POINTER = 1,
  DLROM_STATUS_INVALID_ARGUMENT = 2,
  DLROM_STATUS_DIMENSION_MISMATCH = 3,
  DLROM_STATUS_NUMERICAL = 4,
  DLROM_STATUS_IO = 5,
  DLROM_STATUS_FORMAT = 6,
  DLROM_STATUS_PANIC = 7,
} DlromStatus;

/**
 * Dense row-major matrix, e.g. a snapshot file.
 */
typedef struct DlromMatrix DlromMatrix;

/**
 * Unit-square triangulation with its mass matrix and Darcy operator data.
 */
typedef struct DlromMesh DlromMesh;

/**
 * Feed-forward network loaded from a checkpoint.
 */
typedef struct DlromNetwork DlromNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *dlrom_last_error(void);

/**
 * Builds the `n_div x n_div` unit-square mesh.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one pointer.
 */
enum DlromStatus dlrom_mesh_create(size_t n_div, struct DlromMesh **out);

/**
 * # Safety
 * `mesh` must be NULL or a pointer from [`dlrom_mesh_create`] not yet freed.
 */
void dlrom_mesh_free(struct DlromMesh *mesh);

/**
 * Number of mesh nodes, 0 for NULL.
 *
 * # Safety
 * `mesh` must be NULL or a live mesh handle.
 */
size_t dlrom_mesh_node_count(const struct DlromMesh *mesh);

/**
 * Writes node coordinates as `x0, y0, x1, y1, ...` (length `2 * nodes`).
 *
 * # Safety
 * `mesh` must be a live handle and `coords` must hold `len` doubles.
 */
enum DlromStatus dlrom_mesh_node_coords(const struct DlromMesh *mesh, double *coords, size_t len);

/**
 * `sqrt(v^T M v)` for a nodal vector `v` of length `nodes`.
 *
 * # Safety
 * `mesh` must be a live handle, `values` must hold `len` doubles and `out`
 * must be writable.
 */
enum DlromStatus dlrom_vh_norm(const struct DlromMesh *mesh,
                               const double *values,
                               size_t len,
                               double *out);

/**
 * Solves the Darcy problem for the nodal log-permeability `sigma`, writing
 * the nodal pressure to `u`. Both buffers have `nodes` entries.
 *
 * # Safety
 * `mesh` must be a live handle; `sigma` and `u` must hold `len` doubles.
 */
enum DlromStatus dlrom_solve_darcy(const struct DlromMesh *mesh,
                                   const double *sigma,
                                   double *u,
                                   size_t len);

/**
 * Evolves the inviscid Burgers equation on `[0, length]` with `n_cells`
 * cells from the cell averages `ic` to `t_final`, writing the result to
 * `out`.
 *
 * # Safety
 * `ic` and `out` must hold `n_cells` doubles.
 */
enum DlromStatus dlrom_solve_burgers(const double *ic,
                                     double *out,
                                     size_t n_cells,
                                     double length,
                                     double dt,
                                     double t_final);

/**
 * Reads a binary snapshot matrix file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum DlromStatus dlrom_snapshots_read(const char *path, struct DlromMatrix **out);

/**
 * # Safety
 * `m` must be NULL or a live matrix handle.
 */
size_t dlrom_matrix_rows(const struct DlromMatrix *m);

/**
 * # Safety
 * `m` must be NULL or a live matrix handle.
 */
size_t dlrom_matrix_cols(const struct DlromMatrix *m);

/**
 * Copies the row-major entries (`rows * cols` doubles) into `data`.
 *
 * # Safety
 * `m` must be a live handle and `data` must hold `len` doubles.
 */
enum DlromStatus dlrom_matrix_copy(const struct DlromMatrix *m, double *data, size_t len);

/**
 * # Safety
 * `m` must be NULL or a handle from [`dlrom_snapshots_read`] not yet freed.
 */
void dlrom_matrix_free(struct DlromMatrix *m);

/**
 * Loads a network checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum DlromStatus dlrom_network_load(const char *path, struct DlromNetwork **out);

/**
 * # Safety
 * `net` must be NULL or a live network handle.
 */
size_t dlrom_network_input_width(const struct DlromNetwork *net);

/**
 * # Safety
 * `net` must be NULL or a live network handle.
 */
size_t dlrom_network_output_width(const struct DlromNetwork *net);

/**
 * Evaluates the network on `rows` row-major inputs of the network's input
 * width, writing `rows * output_width` doubles to `output`.
 *
 * # Safety
 * `net` must be a live handle; `input` must hold `input_len` doubles and
 * `output` must hold `output_len` doubles.
 */
enum DlromStatus dlrom_network_forward(const struct DlromNetwork *net,
                                       const double *input,
                                       size_t input_len,
                                       size_t rows,
                                       double *output,
                                       size_t output_len);

/**
 * # Safety
 * `net` must be NULL or a handle from [`dlrom_network_load`] not yet freed.
 */
void dlrom_network_free(struct DlromNetwork *net);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DLROM_H */
