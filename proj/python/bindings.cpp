#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "evspike/baselines.hpp"
#include "evspike/encoder.hpp"
#include "evspike/evaluation.hpp"
#include "evspike/evspd.hpp"
#include "evspike/nnspd.hpp"
#include "evspike/synthgen.hpp"

namespace py = pybind11;
using namespace evspike;

PYBIND11_MODULE(_evspike, m) {
    m.doc() = "Event-based spike detection pipeline";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

    py::class_<RecordingMeta>(m, "RecordingMeta")
        .def(py::init<>())
        .def_readwrite("seed", &RecordingMeta::seed)
        .def_readwrite("noise_sigma", &RecordingMeta::noise_sigma);

    py::class_<Recording>(m, "Recording")
        .def(py::init<>())
        .def_readwrite("samples", &Recording::samples)
        .def_readwrite("sample_rate_hz", &Recording::sample_rate_hz)
        .def_readwrite("meta", &Recording::meta)
        .def("duration_us", &Recording::duration_us);

    py::class_<GroundTruth>(m, "GroundTruth")
        .def(py::init<>())
        .def_readwrite("spike_times_us", &GroundTruth::spike_times_us)
        .def_readwrite("neuron_ids", &GroundTruth::neuron_ids)
        .def("__len__", &GroundTruth::size);

    py::class_<GeneratorConfig>(m, "GeneratorConfig")
        .def(py::init<>())
        .def_readwrite("sample_rate_hz", &GeneratorConfig::sample_rate_hz)
        .def_readwrite("duration_s", &GeneratorConfig::duration_s)
        .def_readwrite("num_neurons", &GeneratorConfig::num_neurons)
        .def_readwrite("firing_rate_hz", &GeneratorConfig::firing_rate_hz)
        .def_readwrite("noise_sigma", &GeneratorConfig::noise_sigma)
        .def_readwrite("per_neuron_refractory_ms", &GeneratorConfig::per_neuron_refractory_ms)
        .def_readwrite("seed", &GeneratorConfig::seed);

    m.def("generate", &generate, py::arg("config"));
    m.def("write_recording", &write_recording, py::arg("path"), py::arg("recording"),
          py::arg("ground_truth"));
    m.def("read_recording", &read_recording, py::arg("path"));

    py::class_<EncoderConfig>(m, "EncoderConfig")
        .def(py::init<>())
        .def_readwrite("k", &EncoderConfig::k)
        .def_readwrite("v_spike_max", &EncoderConfig::v_spike_max)
        .def_readwrite("bin_us", &EncoderConfig::bin_us)
        .def_readwrite("allow_multi_event_per_sample",
                       &EncoderConfig::allow_multi_event_per_sample)
        .def("th_on", &EncoderConfig::th_on)
        .def("th_off", &EncoderConfig::th_off);

    py::class_<Pulse>(m, "Pulse")
        .def_readonly("time_us", &Pulse::time_us)
        .def_readonly("polarity", &Pulse::polarity);

    py::class_<PulseTrain>(m, "PulseTrain")
        .def(py::init<>())
        .def_readwrite("pulses", &PulseTrain::pulses)
        .def("__len__", [](const PulseTrain& pt) { return pt.pulses.size(); });

    py::class_<PcmSeries::Bin>(m, "PcmBin")
        .def_readonly("index", &PcmSeries::Bin::index)
        .def_readonly("n_on", &PcmSeries::Bin::n_on)
        .def_readonly("n_off", &PcmSeries::Bin::n_off);

    py::class_<PcmSeries>(m, "PcmSeries")
        .def(py::init<>())
        .def_readwrite("bin_us", &PcmSeries::bin_us)
        .def_readwrite("num_bins", &PcmSeries::num_bins)
        .def_readwrite("nonzero", &PcmSeries::nonzero)
        .def_readwrite("saturated", &PcmSeries::saturated);

    py::class_<SparsityReport>(m, "SparsityReport")
        .def_readonly("s_pcm", &SparsityReport::s_pcm)
        .def_readonly("events_total", &SparsityReport::events_total)
        .def_readonly("events_on", &SparsityReport::events_on)
        .def_readonly("events_off", &SparsityReport::events_off)
        .def_readonly("saturated", &SparsityReport::saturated);

    m.def(
        "encode",
        [](const Recording& rec, const EncoderConfig& cfg) { return encode(rec, cfg); },
        py::arg("recording"), py::arg("config"));
    m.def("bin_pcm", &bin_pcm, py::arg("pulse_train"), py::arg("config"),
          py::arg("duration_us"));
    m.def("recover", &recover, py::arg("pcm"), py::arg("config"), py::arg("initial") = 0.0);
    m.def("sparsity", &sparsity, py::arg("pcm"));
    m.def("write_pcm", &write_pcm, py::arg("path"), py::arg("pcm"), py::arg("k") = 0.2,
          py::arg("v_spike_max") = 1.0, py::arg("source_sha256") = "");
    m.def("read_pcm", &read_pcm, py::arg("path"));

    py::class_<DetectionSet>(m, "DetectionSet")
        .def(py::init<>())
        .def_readwrite("times_us", &DetectionSet::times_us)
        .def_readwrite("channel_id", &DetectionSet::channel_id)
        .def_readwrite("detector_tag", &DetectionSet::detector_tag)
        .def("__len__", [](const DetectionSet& d) { return d.times_us.size(); });

    py::class_<EvSpdConfig>(m, "EvSpdConfig")
        .def(py::init<>())
        .def_readwrite("n_th", &EvSpdConfig::n_th)
        .def_readwrite("tau_bins", &EvSpdConfig::tau_bins)
        .def_readwrite("t_ref_us", &EvSpdConfig::t_ref_us);

    m.def("detect_ev", &detect_ev, py::arg("pcm"), py::arg("config"));

    py::class_<FrameConfig>(m, "FrameConfig")
        .def(py::init<>())
        .def_readwrite("tau_f_bins", &FrameConfig::tau_f_bins)
        .def_readwrite("count_clip", &FrameConfig::count_clip)
        .def_readwrite("label_margin_us", &FrameConfig::label_margin_us)
        .def("frame_length", &FrameConfig::frame_length);

    py::class_<EventFrame>(m, "EventFrame")
        .def(py::init<>())
        .def_readwrite("values", &EventFrame::values)
        .def_readwrite("center_bin", &EventFrame::center_bin)
        .def_readwrite("label", &EventFrame::label);

    m.def("extract_frames", &extract_frames, py::arg("pcm"), py::arg("ground_truth"),
          py::arg("frame_config"), py::arg("delta_t_us") = 500.0, py::arg("seed") = 0);

    py::class_<MlpModel>(m, "MlpModel")
        .def(py::init<>())
        .def_readwrite("layer_dims", &MlpModel::layer_dims)
        .def_readwrite("weights", &MlpModel::weights)
        .def_readwrite("biases", &MlpModel::biases)
        .def_readwrite("decision_threshold", &MlpModel::decision_threshold)
        .def("forward",
             [](const MlpModel& m_, const std::vector<float>& v) { return m_.forward(v); })
        .def("num_parameters", &MlpModel::num_parameters);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("validation_fraction", &TrainConfig::validation_fraction)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("early_stop_patience", &TrainConfig::early_stop_patience);

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("model", &TrainResult::model);

    m.def("train", &train, py::arg("frames"), py::arg("layer_dims"), py::arg("config"));
    m.def("infer_online", &infer_online, py::arg("pcm"), py::arg("model"),
          py::arg("frame_config"), py::arg("t_ref_us") = 1000.0);

    py::class_<ComplexityReport>(m, "ComplexityReport")
        .def_readonly("mac_per_frame_dense", &ComplexityReport::mac_per_frame_dense)
        .def_readonly("mac_per_frame_effective", &ComplexityReport::mac_per_frame_effective)
        .def_readonly("memory_bits", &ComplexityReport::memory_bits);

    m.def("complexity", &complexity, py::arg("model"), py::arg("s_pcm"),
          py::arg("bit_width") = 32);
    m.def("save_model", &save_model, py::arg("path"), py::arg("model"));
    m.def("load_model", &load_model, py::arg("path"));

    py::class_<FilterSpec>(m, "FilterSpec")
        .def(py::init<>())
        .def_readwrite("low_hz", &FilterSpec::low_hz)
        .def_readwrite("high_hz", &FilterSpec::high_hz)
        .def_readwrite("order", &FilterSpec::order);

    py::class_<ThresholdSpec> tspec(m, "ThresholdSpec");
    py::enum_<ThresholdSpec::Method>(tspec, "Method")
        .value("absolute", ThresholdSpec::Method::absolute)
        .value("neo", ThresholdSpec::Method::neo);
    tspec.def(py::init<>())
        .def_readwrite("method", &ThresholdSpec::method)
        .def_readwrite("multiplier", &ThresholdSpec::multiplier)
        .def_readwrite("t_ref_us", &ThresholdSpec::t_ref_us);

    m.def("bandpass", &bandpass, py::arg("recording"), py::arg("spec"));
    m.def("detect_at", &detect_at, py::arg("recording"), py::arg("spec"));
    m.def("detect_neo", &detect_neo, py::arg("recording"), py::arg("spec"));

    py::class_<MatchConfig>(m, "MatchConfig")
        .def(py::init<>())
        .def_readwrite("delta_t_us", &MatchConfig::delta_t_us);

    py::class_<MetricsReport>(m, "MetricsReport")
        .def_readonly("tp", &MetricsReport::tp)
        .def_readonly("fp", &MetricsReport::fp)
        .def_readonly("fn", &MetricsReport::fn)
        .def_readonly("sensitivity", &MetricsReport::sensitivity)
        .def_readonly("fdr", &MetricsReport::fdr)
        .def_readonly("accuracy", &MetricsReport::accuracy);

    py::class_<CompressionReport>(m, "CompressionReport")
        .def_readonly("total_pcm_events", &CompressionReport::total_pcm_events)
        .def_readonly("detected_spikes", &CompressionReport::detected_spikes)
        .def_readonly("events_per_spike", &CompressionReport::events_per_spike)
        .def_readonly("compression_ratio", &CompressionReport::compression_ratio)
        .def_readonly("defined", &CompressionReport::defined);

    m.def("match", &match, py::arg("detections"), py::arg("ground_truth"), py::arg("config"));
    m.def("compression", &compression, py::arg("pcm"), py::arg("detections"),
          py::arg("packet_bits_event") = 1.0, py::arg("packet_bits_spike") = 1.0);
}
