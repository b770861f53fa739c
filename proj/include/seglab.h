/* C API for the seglab segmentation toolkit.
 *
 * All functions return SEGLAB_OK (0) on success, SEGLAB_ERR_VALIDATION (1)
 * for malformed inputs, or SEGLAB_ERR_RUNTIME (2) for anything else;
 * seglab_last_error() describes the most recent failure on the calling
 * thread. Strings returned through char** are owned by the caller and must
 * be released with seglab_string_free().
 */
#ifndef SEGLAB_H
#define SEGLAB_H

#ifdef __cplusplus
extern "C" {
#endif

#define SEGLAB_OK 0
#define SEGLAB_ERR_VALIDATION 1
#define SEGLAB_ERR_RUNTIME 2

typedef struct seglab_dataset seglab_dataset;
typedef struct seglab_model seglab_model;

const char* seglab_version(void);
const char* seglab_last_error(void);
void seglab_string_free(char* s);

/* Datasets ------------------------------------------------------------ */
int seglab_dataset_open(const char* manifest_path, seglab_dataset** out);
void seglab_dataset_close(seglab_dataset* ds);
int seglab_dataset_validate(const seglab_dataset* ds, char** report_text);
int seglab_dataset_num_tasks(const seglab_dataset* ds);
int seglab_dataset_num_videos(const seglab_dataset* ds);

/* Models --------------------------------------------------------------- */
int seglab_model_open(const char* path, seglab_model** out);
void seglab_model_close(seglab_model* m);
int seglab_model_save(const seglab_model* m, const char* path);

/* Pipeline stages. config_json mirrors the run config schema; pass NULL
 * or "{}" for defaults where noted. */
int seglab_pca_fit(const seglab_dataset* ds, int components, const char* out_model_path,
                   char** stats_text);
int seglab_train(const seglab_dataset* ds, const char* config_json, seglab_model** out);
int seglab_predict(const seglab_dataset* ds, const seglab_model* m, const char* config_json,
                   const char* out_predictions_path);
int seglab_evaluate(const seglab_dataset* ds, const char* predictions_path, int hungarian,
                    const char* out_report_path, char** report_table);
int seglab_synth(const char* spec_json, const char* out_dir);
int seglab_visualize(const seglab_dataset* ds, const char* predictions_path,
                     const char* out_dir);

/* End-to-end experiment; eval_manifest_path may be NULL to evaluate on the
 * training set. Writes predictions, model, report under out_dir and
 * returns the report table. */
int seglab_run(const char* manifest_path, const char* eval_manifest_path,
               const char* config_json, const char* out_dir, char** report_table);

#ifdef __cplusplus
}
#endif

#endif /* SEGLAB_H */
