#ifndef DBP_DBP_H
#define DBP_DBP_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define DBP_API __attribute__((visibility("default")))
#else
#define DBP_API
#endif

typedef enum dbp_status {
    DBP_OK = 0,
    DBP_ERR_INVALID_ARGUMENT = 1,
    DBP_ERR_USAGE = 2,
    DBP_ERR_NUMERICAL = 3,
    DBP_ERR_IO = 4,
    DBP_ERR_FORMAT = 5,
    DBP_ERR_NOT_FOUND = 6,
    DBP_ERR_INTERNAL = 7
} dbp_status;

/* Message of the last failing call on this thread; empty after success. */
DBP_API const char* dbp_last_error(void);
DBP_API const char* dbp_status_name(dbp_status status);

typedef struct dbp_image dbp_image;
typedef struct dbp_sinogram dbp_sinogram;
typedef struct dbp_model dbp_model;
typedef struct dbp_dataset dbp_dataset;
typedef struct dbp_report dbp_report;

/* Images: size x size, row-major. */
DBP_API dbp_status dbp_image_create(size_t size, const double* values, dbp_image** out);
DBP_API void dbp_image_free(dbp_image* image);
DBP_API size_t dbp_image_size(const dbp_image* image);
DBP_API const double* dbp_image_data(const dbp_image* image);
DBP_API dbp_status dbp_image_save(const dbp_image* image, const char* path);
DBP_API dbp_status dbp_image_load(const char* path, dbp_image** out);

typedef struct dbp_phantom_spec {
    size_t size;
    size_t grain_min;
    size_t grain_max;
    double intensity_min;
    double intensity_max;
    uint64_t seed;
} dbp_phantom_spec;

/* 64 x 64, 6 to 14 grains, intensities in [0.2, 1], seed 0. */
DBP_API dbp_phantom_spec dbp_phantom_spec_default(void);
DBP_API dbp_status dbp_phantom_generate(const dbp_phantom_spec* spec, dbp_image** out);

/* Sinograms: channels x views, row-major, with strictly increasing angles in [0, pi). */
DBP_API dbp_status dbp_uniform_angles(size_t views, double* out);
DBP_API void dbp_sinogram_free(dbp_sinogram* sino);
DBP_API size_t dbp_sinogram_channels(const dbp_sinogram* sino);
DBP_API size_t dbp_sinogram_views(const dbp_sinogram* sino);
DBP_API const double* dbp_sinogram_data(const dbp_sinogram* sino);
DBP_API const double* dbp_sinogram_angles(const dbp_sinogram* sino);
DBP_API dbp_status dbp_sinogram_save(const dbp_sinogram* sino, const char* path);
DBP_API dbp_status dbp_sinogram_load(const char* path, const double* angles, size_t views, dbp_sinogram** out);

DBP_API dbp_status dbp_angles_save(const double* angles, size_t views, const char* path);
/* Writes at most `capacity` angles; `count` receives the stored count. */
DBP_API dbp_status dbp_angles_load(const char* path, double* out, size_t capacity, size_t* count);

/* Square detector with as many channels as the image has rows. */
DBP_API dbp_status dbp_radon(const dbp_image* image, const double* angles, size_t views, dbp_sinogram** out);
DBP_API dbp_status dbp_fbp(const dbp_sinogram* sino, dbp_image** out);

/* Panels are placed left to right. */
DBP_API dbp_status dbp_export_pgm(const dbp_image* const* panels, size_t count, const char* path);

/* Training set: scans of (sinogram, ground truth), all with the same geometry and angles. */
DBP_API dbp_status dbp_dataset_create(dbp_dataset** out);
DBP_API void dbp_dataset_free(dbp_dataset* dataset);
DBP_API dbp_status dbp_dataset_add(dbp_dataset* dataset, int scan_id, const dbp_sinogram* sino,
                                   const dbp_image* phantom);

typedef enum dbp_preset { DBP_PRESET_LITE = 0, DBP_PRESET_PAPER = 1 } dbp_preset;

typedef struct dbp_train_config {
    size_t epochs;
    size_t batch_size;
    double lr_start;
    double lr_end;
    size_t patches_per_scan;
    size_t patch_size;
    size_t depth;
    size_t width;
    uint64_t seed;
    dbp_preset preset;
} dbp_train_config;

DBP_API dbp_status dbp_train_config_preset(dbp_preset preset, dbp_train_config* out);

typedef void (*dbp_epoch_callback)(size_t epoch, double lr, double mean_loss, void* user);

/* The first `train_count` scan ids in ascending order train; the rest are held out. */
DBP_API dbp_status dbp_train(const dbp_dataset* dataset, size_t train_count, const dbp_train_config* config,
                             dbp_epoch_callback on_epoch, void* user, dbp_model** out);

DBP_API void dbp_model_free(dbp_model* model);
DBP_API size_t dbp_model_views(const dbp_model* model);
DBP_API size_t dbp_model_depth(const dbp_model* model);
DBP_API size_t dbp_model_width(const dbp_model* model);
/* Extra metadata lines are "key=value" pairs separated by newlines; may be NULL. */
DBP_API dbp_status dbp_model_save(const dbp_model* model, const char* extra_metadata, const char* path);
DBP_API dbp_status dbp_model_load(const char* path, dbp_model** out);
/* Value of a metadata key from the last load, or NULL. */
DBP_API const char* dbp_model_metadata(const dbp_model* model, const char* key);
DBP_API dbp_status dbp_model_reconstruct(const dbp_model* model, const dbp_sinogram* sino, dbp_image** out);

/* Returns +inf for identical images. */
DBP_API dbp_status dbp_psnr(const dbp_image* a, const dbp_image* b, double* out);
DBP_API dbp_status dbp_ssim(const dbp_image* a, const dbp_image* b, double* out);

DBP_API dbp_status dbp_report_create(dbp_report** out);
DBP_API void dbp_report_free(dbp_report* report);
DBP_API dbp_status dbp_report_add(dbp_report* report, int scan_id, const char* method, const dbp_image* pred,
                                  const dbp_image* truth);
/* Mean and sample standard deviation over finite PSNR values and all SSIM values.
   A std is NaN when fewer than two values exist. */
DBP_API dbp_status dbp_report_aggregate(const dbp_report* report, const char* method, size_t* count,
                                        double* psnr_mean, double* psnr_std, double* ssim_mean, double* ssim_std);
DBP_API dbp_status dbp_report_write(const dbp_report* report, const char* path);

#ifdef __cplusplus
}
#endif

#endif
