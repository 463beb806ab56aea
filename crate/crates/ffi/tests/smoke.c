#include <stdio.h>
#include "dioph_lab.h"

int main(void) {
    DiophPsi *psi = NULL;
    if (dioph_psi_parse("kind = \"power_log\"\ntau = \"1/2\"\n", &psi) != DIOPH_STATUS_OK) {
        fprintf(stderr, "%s\n", dioph_last_error());
        return 1;
    }
    bool diverges = false;
    DiophStatus st = dioph_classify_series(psi, 2, 1, "0", &diverges);
    dioph_psi_free(psi);
    if (st != DIOPH_STATUS_OK || !diverges) {
        return 2;
    }
    DiophSubspace *sub = NULL;
    if (dioph_subspace_parse("d = 1", &sub) == DIOPH_STATUS_OK) {
        return 3;
    }
    printf("ok\n");
    return 0;
}
