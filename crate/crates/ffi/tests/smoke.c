#include <stdio.h>
#include <stdlib.h>
#include "hrbench.h"

int main(void) {
    HrbSeries *s = NULL;
    if (hrb_series_synth("quasi_periodic", 1, 300, &s) != HRB_STATUS_OK) {
        fprintf(stderr, "synth: %s\n", hrb_last_error_message());
        return 1;
    }
    size_t n = hrb_series_len(s);
    double *buf = malloc(n * sizeof(double));
    size_t written = 0;
    if (hrb_series_values(s, buf, n, &written) != HRB_STATUS_OK || written != n) {
        return 1;
    }
    printf("len=%zu first=%.3f\n", n, buf[0]);
    free(buf);
    hrb_series_free(s);

    double y[2] = {100.0, 200.0};
    double yhat[2] = {110.0, 180.0};
    HrbMetrics m;
    if (hrb_metrics(y, yhat, 2, &m) != HRB_STATUS_OK) {
        return 1;
    }
    printf("mae=%f mape=%f rmse=%f\n", m.mae, m.mape, m.rmse);

    HrbReport *r = NULL;
    HrbStatus st = hrb_bench_run("models=unknown_model\n", &r);
    printf("status=%d msg=%s\n", (int)st, hrb_last_error_message());
    return r == NULL ? 0 : 1;
}
