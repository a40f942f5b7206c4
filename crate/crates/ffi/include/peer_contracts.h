#ifndef PEER_CONTRACTS_H
#define PEER_CONTRACTS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PcStatus {
  PC_STATUS_OK = 0,
  PC_STATUS_INVALID_INPUT = 1,
  PC_STATUS_INVALID_REGIME = 2,
  PC_STATUS_NON_DIAGONALIZABLE = 3,
  PC_STATUS_INDEFINITE_OBJECTIVE = 4,
  PC_STATUS_NON_CONCAVE = 5,
  PC_STATUS_PARSE = 6,
  PC_STATUS_IO = 7,
  PC_STATUS_NULL_POINTER = 8,
  PC_STATUS_PANIC = 9,
} PcStatus;

/**
 * Opaque network handle.
 */
typedef struct PcNetwork PcNetwork;

/**
 * Model parameters. `v` is the effort-cost scale; the solvers exposed here
 * require `v = 1`.
 */
typedef struct PcParams {
  double lambda;
  double r;
  double sigma2;
  double v;
} PcParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a network from a row-major `n x n` adjacency matrix. Entry
 * `(i, j)` is how much worker `j`'s effort lowers worker `i`'s cost.
 *
 * # Safety
 * `adjacency` must point to `n * n` doubles and `out` to writable storage.
 */
enum PcStatus pc_network_from_adjacency(uintptr_t n,
                                        const double *adjacency,
                                        int directed,
                                        struct PcNetwork **out);

/**
 * Samples a symmetric Erdos-Renyi network.
 *
 * # Safety
 * `out` must point to writable storage.
 */
enum PcStatus pc_network_erdos_renyi(uintptr_t n, double p, uint64_t seed, struct PcNetwork **out);

/**
 * Reads an edge-list file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum PcStatus pc_network_read_edge_list(const char *path, struct PcNetwork **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `net` must come from a `pc_network_*` constructor and not be used afterwards.
 */
void pc_network_free(struct PcNetwork *net);

/**
 * Number of workers, or 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
uintptr_t pc_network_size(const struct PcNetwork *net);

/**
 * # Safety
 * `net` must be a live handle; `out` null or writable.
 */
enum PcStatus pc_spectral_radius(const struct PcNetwork *net, double *out);

/**
 * Bonacich centralities: `C1` when `outgoing` is 0, `C'1` otherwise.
 *
 * # Safety
 * `net` must be a live handle; `out` null or room for `n` doubles.
 */
enum PcStatus pc_bonacich(const struct PcNetwork *net, double lambda, int outgoing, double *out);

/**
 * First-best contract and efforts.
 *
 * # Safety
 * Vector outputs must be null or hold `n` doubles.
 */
enum PcStatus pc_first_best(const struct PcNetwork *net,
                            const struct PcParams *params,
                            double *alpha,
                            double *beta,
                            double *efforts,
                            double *profit);

/**
 * Optimal per-worker contract.
 *
 * # Safety
 * Vector outputs must be null or hold `n` doubles.
 */
enum PcStatus pc_granular(const struct PcNetwork *net,
                          const struct PcParams *params,
                          double *alpha,
                          double *beta,
                          double *efforts,
                          double *profit);

/**
 * Optimal group-level contract. `groups[i]` is worker `i`'s group id; ids
 * must cover `0..k` without gaps.
 *
 * # Safety
 * `groups` must hold `n` entries; vector outputs null or `n` doubles.
 */
enum PcStatus pc_coarse(const struct PcNetwork *net,
                        const struct PcParams *params,
                        const uintptr_t *groups,
                        double *alpha,
                        double *beta,
                        double *rents,
                        double *profit);

/**
 * Optimal contract when output is the minimum over modules.
 *
 * # Safety
 * `modules` must hold `n` entries; vector outputs null or `n` doubles.
 */
enum PcStatus pc_modular(const struct PcNetwork *net,
                         const struct PcParams *params,
                         const uintptr_t *modules,
                         double *alpha,
                         double *beta,
                         double *efforts,
                         double *profit);

/**
 * Optimal profit from the network spectrum, with the direct solver value.
 *
 * # Safety
 * `net` and `params` must be live; outputs null or writable.
 */
enum PcStatus pc_spectral_profit(const struct PcNetwork *net,
                                 const struct PcParams *params,
                                 double *spectral,
                                 double *direct);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length including the NUL,
 * or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or hold `len` bytes.
 */
uintptr_t pc_last_error_message(char *buf, uintptr_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEER_CONTRACTS_H */
