#include <math.h>
#include <stdio.h>
#include <string.h>

#include "hicrit.h"

#define CHECK(cond)                                                            \
  do {                                                                         \
    if (!(cond)) {                                                             \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond,           \
              hicrit_last_error());                                            \
      return 1;                                                                \
    }                                                                          \
  } while (0)

int main(void) {
  double b = 0.0, p = 0.0, value = 0.0;
  size_t argmax = 0;
  bool rejects = false;

  CHECK(hicrit_threshold(HICRIT_KIND_MBJ, 1000, 0.01, 1, 500, &b) == HICRIT_STATUS_OK);
  CHECK(fabs(b - 3.40) < 0.01);
  CHECK(hicrit_tail_pvalue(HICRIT_KIND_MBJ, 1000, b, 1, 500, &p) == HICRIT_STATUS_OK);
  CHECK(fabs(p - 0.01) < 1e-6);

  const double pv[4] = {0.9, 0.1, 0.6, 0.3};
  HicritSample *sample = NULL;
  CHECK(hicrit_sample_new(pv, 4, &sample) == HICRIT_STATUS_OK);
  CHECK(hicrit_sample_len(sample) == 4);
  CHECK(hicrit_evaluate(sample, HICRIT_KIND_HC, 1, 2, &value, &argmax) == HICRIT_STATUS_OK);
  CHECK(fabs(value - 1.0) < 1e-12 && argmax == 1);

  HicritRule *rule = NULL;
  CHECK(hicrit_rule_new(HICRIT_KIND_HC, 4, 0.99, 1, 2, &rule) == HICRIT_STATUS_OK);
  CHECK(hicrit_rule_rejects(rule, sample, &rejects) == HICRIT_STATUS_OK && rejects);
  hicrit_rule_free(rule);
  hicrit_sample_free(sample);

  const double bad[2] = {0.5, 1.5};
  sample = NULL;
  CHECK(hicrit_sample_new(bad, 2, &sample) == HICRIT_STATUS_INPUT);
  CHECK(sample == NULL);
  CHECK(strlen(hicrit_last_error()) > 0);
  CHECK(hicrit_threshold(HICRIT_KIND_HC, 100, 0.05, 1, 50, NULL) == HICRIT_STATUS_NULL_POINTER);

  double y[3 * 50];
  for (int i = 0; i < 150; i++) y[i] = (i % 50 >= 20 && i % 50 < 24) ? 6.0 : 0.0;
  HicritDataset *ds = NULL;
  HicritScanResult *res = NULL;
  HicritDetection det;
  CHECK(hicrit_dataset_new(y, 3, 50, NULL, &ds) == HICRIT_STATUS_OK);
  CHECK(hicrit_scan(ds, HICRIT_KIND_MBJ, 5, 0.05, &res) == HICRIT_STATUS_OK);
  CHECK(hicrit_scan_result_len(res) >= 1);
  CHECK(hicrit_scan_result_get(res, 0, &det) == HICRIT_STATUS_OK);
  CHECK(det.start < 24 && det.start + det.len > 20);
  CHECK(hicrit_scan_result_get(res, 99, &det) == HICRIT_STATUS_INPUT);
  hicrit_scan_result_free(res);
  hicrit_dataset_free(ds);

  printf("ok %s\n", hicrit_version());
  return 0;
}
