#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "vigil.h"

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(void) {
    VigilClassifier *c = NULL;
    CHECK(vigil_classifier_new("constant:0.1,0.2,0.6,0.1", &c) == VIGIL_STATUS_OK);

    uint32_t w = 160, h = 128;
    uint8_t *rgb = malloc((size_t)w * h * 3);
    memset(rgb, 120, (size_t)w * h * 3);

    VigilResult r;
    CHECK(vigil_classify_rgb(c, rgb, w, h, &r) == VIGIL_STATUS_OK);
    CHECK(r.label == VIGIL_LABEL_CALLING);
    CHECK(strcmp(vigil_label_name(r.label), "calling") == 0);

    VigilResult whole, tiles[4];
    uint8_t mask[4];
    CHECK(vigil_localize_rgb(c, rgb, w, h, 2, 2, &whole, tiles, mask, 4) == VIGIL_STATUS_OK);
    CHECK(mask[0] == 1 && mask[3] == 1);
    CHECK(vigil_classifier_invocations(c) == 1 + 5);

    CHECK(vigil_localize_rgb(c, rgb, 40, 40, 2, 2, &whole, tiles, mask, 4) == VIGIL_STATUS_TILE_TOO_SMALL);
    CHECK(vigil_last_error() != NULL);

    VigilDarkReport d;
    CHECK(vigil_dark_report_rgb(rgb, w, h, 50, 0.3, &d) == VIGIL_STATUS_OK);
    CHECK(!d.is_dark && d.total_pixels == (uint64_t)w * h);

    VigilTemporal *t = NULL;
    CHECK(vigil_temporal_new(15, &t) == VIGIL_STATUS_OK);
    VigilSmoothed s;
    CHECK(vigil_temporal_push(t, &r, &s) == VIGIL_STATUS_OK);
    CHECK(s.mode_label == VIGIL_LABEL_CALLING && s.frame_index == 0);
    vigil_temporal_free(t);

    double lr = 0;
    CHECK(vigil_cosine_decay_lr(1.0, 10, 0.0, 10, &lr) == VIGIL_STATUS_OK);
    CHECK(lr < 1e-12);

    VigilClassifier *bad = NULL;
    CHECK(vigil_classifier_new("nope", &bad) == VIGIL_STATUS_INVALID_INPUT);
    CHECK(bad == NULL);

    free(rgb);
    vigil_classifier_free(c);
    puts("ok");
    return 0;
}
