/* C interface to the retirement funding planner. */
#ifndef RFP_H
#define RFP_H

#if defined(_WIN32)
#define RFP_API __declspec(dllexport)
#else
#define RFP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as CLI exit codes. */
typedef enum rfp_status {
    RFP_OK = 0,
    RFP_SOLVER_ERROR = 1,   /* infeasible plan or optimizer failure */
    RFP_INPUT_ERROR = 2,    /* invalid request, profile or data file */
    RFP_SERVICE_ERROR = 3,  /* HTTP service could not bind or run */
    RFP_INTERNAL_ERROR = 4
} rfp_status;

typedef struct rfp_engine rfp_engine;
typedef struct rfp_server rfp_server;

RFP_API const char* rfp_version(void);

/* Message of the last failed call on this thread; empty when none. */
RFP_API const char* rfp_last_error(void);

/* Loads tax, RMD, life tables and market models. data_dir NULL: default directory.
   preset_path NULL: the bundled model preset. */
RFP_API rfp_status rfp_engine_create(const char* data_dir, const char* preset_path, rfp_engine** out);
RFP_API void rfp_engine_destroy(rfp_engine* engine);

/* JSON request in, JSON document out. On failure *response holds an error document
   with "error", "message" and, where known, "fields" or "year". Free with rfp_string_free. */
RFP_API rfp_status rfp_plan(const rfp_engine* engine, const char* request, char** response);
RFP_API rfp_status rfp_simulate(const rfp_engine* engine, const char* request, char** response);
RFP_API rfp_status rfp_fit(const rfp_engine* engine, const char* request, char** response);
RFP_API void rfp_string_free(char* s);

/* HTTP service. config is a JSON object with optional host, port, max_scenarios,
   threads and allowed_origin. Binds immediately; a taken port gives RFP_SERVICE_ERROR. */
RFP_API rfp_status rfp_server_create(const rfp_engine* engine, const char* config, rfp_server** out);
RFP_API int rfp_server_port(const rfp_server* server);
/* Blocks until rfp_server_stop is called from another thread. */
RFP_API rfp_status rfp_server_run(rfp_server* server);
RFP_API void rfp_server_stop(rfp_server* server);
RFP_API void rfp_server_destroy(rfp_server* server);

#ifdef __cplusplus
}
#endif

#endif
