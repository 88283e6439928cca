#ifndef WIFI_PHY_H
#define WIFI_PHY_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum WifiChannel {
  WIFI_CHANNEL_IDEAL = 0,
  WIFI_CHANNEL_AWGN = 1,
  WIFI_CHANNEL_TGAC_B = 2,
} WifiChannel;

typedef enum WifiFormat {
  WIFI_FORMAT_LEGACY = 0,
  WIFI_FORMAT_HT = 1,
  WIFI_FORMAT_VHT = 2,
  WIFI_FORMAT_VHT_MU = 3,
  WIFI_FORMAT_VHT_NDP = 4,
} WifiFormat;

/**
 * Result of every fallible call.
 */
typedef enum WifiStatus {
  WIFI_STATUS_OK = 0,
  WIFI_STATUS_NULL_POINTER = 1,
  WIFI_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The frame description cannot be transmitted.
   */
  WIFI_STATUS_TX = 3,
  WIFI_STATUS_IO = 4,
  WIFI_STATUS_BUFFER_TOO_SMALL = 5,
  WIFI_STATUS_OUT_OF_RANGE = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  WIFI_STATUS_INTERNAL = 7,
} WifiStatus;

/**
 * A transmitted frame, one sample stream per antenna.
 */
typedef struct WifiFrame WifiFrame;

/**
 * Packets found by one [`wifi_receiver_decode`] call.
 */
typedef struct WifiPackets WifiPackets;

typedef struct WifiReceiver WifiReceiver;

/**
 * Receiver settings; start from [`wifi_rx_options_default`].
 */
typedef struct WifiRxOptions {
  double threshold;
  size_t min_plateau;
  size_t user_position;
  size_t backoff;
} WifiRxOptions;

/**
 * Summary of one decoded packet.
 */
typedef struct WifiPacketInfo {
  enum WifiFormat format;
  uint8_t mcs;
  bool crc_ok;
  size_t signaled_length;
  /**
   * Octets available from [`wifi_packets_payload`].
   */
  size_t payload_len;
  size_t start;
  size_t end;
  double cfo_hz;
} WifiPacketInfo;

/**
 * PDR sweep description. `mcs` points to `n_mcs` entries.
 */
typedef struct WifiSweepSpec {
  enum WifiFormat format;
  const uint8_t *mcs;
  size_t n_mcs;
  double snr_start;
  double snr_stop;
  double snr_step;
  size_t trials;
  size_t payload_octets;
  double cfo_hz;
  enum WifiChannel channel;
  uint64_t seed;
} WifiSweepSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *wifi_version(void);

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `cap`). Returns the full message length plus one, or 0 when
 * no error has been recorded. `buf` may be NULL to query the length.
 */
size_t wifi_last_error(char *buf, size_t cap);

/**
 * Assemble a single-user frame or a sounding NDP. `payload` may be NULL when
 * `payload_len` is 0; it is ignored for NDPs. Multi-user frames need a
 * steering matrix and are not available through this interface.
 */
enum WifiStatus wifi_frame_build(enum WifiFormat format,
                                 uint8_t mcs,
                                 size_t n_tx,
                                 const uint8_t *payload,
                                 size_t payload_len,
                                 struct WifiFrame **out);

void wifi_frame_free(struct WifiFrame *frame);

/**
 * Number of transmit streams, 0 for NULL.
 */
size_t wifi_frame_n_streams(const struct WifiFrame *frame);

/**
 * Samples per stream, 0 for NULL.
 */
size_t wifi_frame_len(const struct WifiFrame *frame);

/**
 * Copy stream `stream` into `iq` as interleaved I/Q. `cap` counts complex
 * samples, so `iq` must hold `2 * cap` doubles.
 */
enum WifiStatus wifi_frame_copy_stream(const struct WifiFrame *frame,
                                       size_t stream,
                                       double *iq,
                                       size_t cap);

struct WifiRxOptions wifi_rx_options_default(void);

/**
 * Create a receiver. `options` may be NULL for the defaults.
 */
enum WifiStatus wifi_receiver_new(const struct WifiRxOptions *options, struct WifiReceiver **out);

void wifi_receiver_free(struct WifiReceiver *rx);

/**
 * Decode every packet in a capture. `streams` points to `n_streams`
 * pointers, each to `n_samples` interleaved I/Q pairs.
 */
enum WifiStatus wifi_receiver_decode(const struct WifiReceiver *rx,
                                     const double *const *streams,
                                     size_t n_streams,
                                     size_t n_samples,
                                     struct WifiPackets **out);

void wifi_packets_free(struct WifiPackets *packets);

/**
 * Number of packets, 0 for NULL.
 */
size_t wifi_packets_count(const struct WifiPackets *packets);

enum WifiStatus wifi_packets_info(const struct WifiPackets *packets,
                                  size_t index,
                                  struct WifiPacketInfo *out);

/**
 * Copy the payload (FCS removed) into `buf`. `written` receives the payload
 * length, also when the buffer is too small.
 */
enum WifiStatus wifi_packets_payload(const struct WifiPackets *packets,
                                     size_t index,
                                     uint8_t *buf,
                                     size_t cap,
                                     size_t *written);

/**
 * Run a PDR sweep and write the CSV report to `csv_path`.
 */
enum WifiStatus wifi_sweep_to_csv(const struct WifiSweepSpec *spec, const char *csv_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WIFI_PHY_H */
