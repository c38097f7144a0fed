#include <stdio.h>
#include <string.h>

#include "wiener_topo.h"

#define CHECK(call)                                                          \
  do {                                                                       \
    WtStatus s_ = (call);                                                    \
    if (s_ != WT_STATUS_OK) {                                                \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,                      \
              wt_last_error() ? wt_last_error() : "(no message)");           \
      return 1;                                                              \
    }                                                                        \
  } while (0)

enum { N = 6, T = 3000 };

int main(void) {
  static double data[N * T];
  double snr[N];
  WtNetwork *net = NULL;
  WtCovariance *cov = NULL;
  WtTopology *est = NULL, *truth = NULL;
  WtComparison report;
  WtConfig config = wt_config_default();
  char *json = NULL;

  CHECK(wt_network_random(N, 2, 3, 11, &net));
  CHECK(wt_network_simulate(net, T, 5.0, data, N * T, snr));
  CHECK(wt_covariance_estimate(data, N, T, 20, &cov));
  config.method = WT_METHOD_COLS;
  config.m = 2;
  CHECK(wt_identify(cov, &config, &est));
  CHECK(wt_network_topology(net, &truth));
  CHECK(wt_topology_compare(truth, est, &report));
  CHECK(wt_topology_to_json(est, &json));

  if (wt_topology_nodes(est) != N || strstr(json, "\"edges\"") == NULL) {
    fprintf(stderr, "unexpected topology\n");
    return 1;
  }
  if (wt_identify(NULL, &config, &est) != WT_STATUS_NULL_ARGUMENT || wt_last_error() == NULL) {
    fprintf(stderr, "null handle not reported\n");
    return 1;
  }
  printf("version %s edges %zu recall %.3f\n", wt_version(), wt_topology_edge_count(est), report.recall);

  wt_string_free(json);
  wt_topology_free(est);
  wt_topology_free(truth);
  wt_covariance_free(cov);
  wt_network_free(net);
  return 0;
}
