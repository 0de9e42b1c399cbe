/* Extracts LBP and HOG features from a synthetic image, then trains a tree on
 * a toy feature matrix and cross-validates an SVM on it. */
#include <stdio.h>
#include <stdlib.h>

#include "texturebench.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        TbStatus s_ = (call);                                              \
        if (s_ != TB_STATUS_OK) {                                          \
            fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_,        \
                    tb_last_error_message());                              \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    enum { W = 308, H = 168 };
    double *img = malloc(sizeof(double) * W * H);
    for (size_t i = 0; i < (size_t)W * H; i++) img[i] = (double)((i * 37 + i / W * 11) % 256);

    double lbp[1182];
    size_t written = 0;
    CHECK(tb_lbp_histogram(img, W, H, 14, 4.0, false, lbp, 1182, &written));
    printf("lbp %zu\n", written);

    size_t hog_len = 0;
    CHECK(tb_hog_len(W, H, 18, 1, 8, &hog_len));
    double *hog = malloc(sizeof(double) * hog_len);
    CHECK(tb_hog_features(img, W, H, 18, 1, 8, false, hog, hog_len, &written));
    printf("hog %zu\n", written);

    double data[12];
    const char *labels[6] = {"a", "a", "a", "b", "b", "b"};
    for (int i = 0; i < 6; i++) {
        data[2 * i] = i < 3 ? (double)i : 10.0 + i;
        data[2 * i + 1] = 1.0;
    }
    TbFeatureMatrix *m = NULL;
    CHECK(tb_features_new(data, 6, 2, labels, "demo", "", &m));

    TbModel *model = NULL;
    CHECK(tb_model_train(m, "{\"kind\":\"tree\",\"criterion\":\"gini\",\"max_depth\":null,"
                            "\"min_samples_split\":2,\"seed\":42}", &model));
    double x[2] = {12.0, 1.0};
    size_t cls = 0;
    CHECK(tb_model_predict(model, x, 2, &cls));
    printf("predict %s\n", tb_model_class_name(model, cls));

    double mean = 0, sd = 0;
    CHECK(tb_cross_validate(m, "{\"kind\":\"svm\",\"c\":1.0,\"gamma\":0.1,\"kernel\":{\"type\":\"rbf\"},"
                               "\"tol\":0.001,\"max_passes\":1000}", 3, 42, true, &mean, &sd));
    printf("cv %.2f %.2f\n", mean, sd);

    if (tb_model_predict(model, x, 1, &cls) != TB_STATUS_DIMENSION_MISMATCH) return 1;

    tb_model_free(model);
    tb_features_free(m);
    free(hog);
    free(img);
    return 0;
}
