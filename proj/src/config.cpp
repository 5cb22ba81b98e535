#include "scv2/config.hpp"

#include <json.hpp>

#include <fstream>
#include <functional>
#include <sstream>

namespace scv2 {

namespace {

struct Field {
    std::string name;
    enum Kind { Double, Int, Bool, String } kind;
    void* ptr;
    double lo = -1e300, hi = 1e300;
    bool lo_open = false; // exclusive lower bound
};

std::vector<Field> registry(RunConfig& c) {
    using F = Field;
    return {
        {"gen.ground_half", F::Double, &c.gen_ground_half, 1e-6, 1e6, true},
        {"gen.boxes", F::Int, &c.gen_boxes, 0, 1024},
        {"gen.image_size", F::Int, &c.gen_image_size, 8, 4096},
        {"gen.ring1_count", F::Int, &c.gen_ring1_count, 0, 4096},
        {"gen.ring2_count", F::Int, &c.gen_ring2_count, 0, 4096},
        {"gen.initial_points", F::Int, &c.gen_initial_points, 4, 100000000},
        {"gen.gt_points", F::Int, &c.gen_gt_points, 4, 100000000},
        {"gen.prior_scale", F::Double, &c.gen_prior_scale, 1e-6, 1e6, true},
        {"gen.prior_shift", F::Double, &c.gen_prior_shift, -1e6, 1e6},
        {"gen.checker", F::Bool, &c.gen_checker},
        {"train.pretrain_iters", F::Int, &c.train_pretrain_iters, 0, 100000000},
        {"train.lambda_ssim", F::Double, &c.train_lambda_ssim, 0.0, 1.0},
        {"train.depth_start", F::Double, &c.train_depth_start, 0.0, 1e6},
        {"train.depth_end", F::Double, &c.train_depth_end, 0.0, 1e6, true},
        {"train.depth_enabled", F::Bool, &c.train_depth_enabled},
        {"train.lambda_normal", F::Double, &c.train_lambda_normal, 0.0, 1e6},
        {"train.normal_start", F::Int, &c.train_normal_start, 0, 100000000},
        {"train.lr_center", F::Double, &c.train_lr_center, 0.0, 1e3, true},
        {"train.lr_center_final_mult", F::Double, &c.train_lr_center_final_mult, 0.0, 1.0, true},
        {"train.lr_rotation", F::Double, &c.train_lr_rotation, 0.0, 1e3},
        {"train.lr_scales", F::Double, &c.train_lr_scales, 0.0, 1e3},
        {"train.lr_opacity", F::Double, &c.train_lr_opacity, 0.0, 1e3},
        {"train.lr_sh", F::Double, &c.train_lr_sh, 0.0, 1e3},
        {"densify.threshold", F::Double, &c.densify_threshold, 0.0, 1e3, true},
        {"densify.omega", F::Double, &c.densify_omega, 0.0, 1.0, true},
        {"densify.elongation_min", F::Double, &c.densify_elongation_min, 0.0, 1.0},
        {"densify.start", F::Int, &c.densify_start, 0, 100000000},
        {"densify.interval", F::Int, &c.densify_interval, 1, 100000000},
        {"densify.end_frac", F::Double, &c.densify_end_frac, 0.0, 1.0},
        {"densify.opacity_reset_interval", F::Int, &c.densify_opacity_reset_interval, 1,
         100000000},
        {"densify.min_opacity", F::Double, &c.densify_min_opacity, 0.0, 0.5, true},
        {"densify.split_scale_frac", F::Double, &c.densify_split_scale_frac, 0.0, 10.0, true},
        {"densify.source", F::String, &c.densify_source},
        {"densify.hard_cap", F::Int, &c.densify_hard_cap, 1, 1000000000},
        {"trim.pretrain_ratio", F::Double, &c.trim_pretrain_ratio, 0.0, 0.999},
        {"trim.tune_ratio", F::Double, &c.trim_tune_ratio, 0.0, 0.999},
        {"trim.stage_ratio", F::Double, &c.trim_stage_ratio, 0.0, 0.999},
        {"trim.every_frac", F::Double, &c.trim_every_frac, 0.0, 1.0},
        {"blocks.x", F::Int, &c.blocks_x, 1, 64},
        {"blocks.y", F::Int, &c.blocks_y, 1, 64},
        {"blocks.ssim_eps", F::Double, &c.blocks_ssim_eps, 0.0, 1.0, true},
        {"blocks.tune_iters", F::Int, &c.blocks_tune_iters, 0, 100000000},
        {"blocks.lr_center_mult", F::Double, &c.blocks_lr_center_mult, 0.0, 10.0, true},
        {"blocks.lr_scales_mult", F::Double, &c.blocks_lr_scales_mult, 0.0, 10.0, true},
        {"compress.ratio", F::Double, &c.compress_ratio, 0.0, 0.999},
        {"compress.codebook", F::Int, &c.compress_codebook, 1, 65536},
        {"mesh.voxel_frac", F::Double, &c.mesh_voxel_frac, 0.0, 1.0, true},
        {"mesh.trunc_voxels", F::Double, &c.mesh_trunc_voxels, 1.0, 64.0},
        {"mesh.depth_trunc", F::Double, &c.mesh_depth_trunc, 0.0, 1e18, true},
        {"eval.vis_threshold", F::Int, &c.eval_vis_threshold, 1, 100000},
        {"eval.alpha", F::Double, &c.eval_alpha, 0.0, 1e9},
        {"eval.tau", F::Double, &c.eval_tau, 0.0, 1e9},
        {"eval.tau_mult", F::Double, &c.eval_tau_mult, 0.0, 1e6, true},
        {"eval.tau_min", F::Double, &c.eval_tau_min, 0.0, 1e9},
        {"eval.tau_max", F::Double, &c.eval_tau_max, 0.0, 1e18, true},
        {"eval.downsample_voxel", F::Double, &c.eval_downsample_voxel, 0.0, 1e9},
        {"eval.samples", F::Int, &c.eval_samples, 0, 1000000000},
        {"eval.vis_radius", F::Double, &c.eval_vis_radius, 0.0, 1e9},
        {"seed", F::Int, reinterpret_cast<int64_t*>(&c.seed), 0, 9.2e18},
        {"threads", F::Int, &c.threads, 0, 4096},
    };
}

[[noreturn]] void fail(const std::string& key, const std::string& what) {
    throw ContractError("config: " + key + " " + what);
}

void assign(const Field& f, const std::string& key, const std::string& raw) {
    switch (f.kind) {
        case Field::Double: {
            char* end = nullptr;
            double v = std::strtod(raw.c_str(), &end);
            if (end == raw.c_str() || *end != '\0') fail(key, "expects a number, got '" + raw + "'");
            if (v < f.lo || v > f.hi || (f.lo_open && v <= f.lo))
                fail(key, "= " + raw + " is out of range " + (f.lo_open ? "(" : "[") +
                              std::to_string(f.lo) + ", " + std::to_string(f.hi) + "]");
            *static_cast<double*>(f.ptr) = v;
            break;
        }
        case Field::Int: {
            char* end = nullptr;
            long long v = std::strtoll(raw.c_str(), &end, 10);
            if (end == raw.c_str() || *end != '\0') fail(key, "expects an integer, got '" + raw + "'");
            if (double(v) < f.lo || double(v) > f.hi)
                fail(key, "= " + raw + " is out of range [" + std::to_string(int64_t(f.lo)) +
                              ", " + std::to_string(int64_t(f.hi)) + "]");
            *static_cast<int64_t*>(f.ptr) = v;
            break;
        }
        case Field::Bool: {
            if (raw == "true" || raw == "1")
                *static_cast<bool*>(f.ptr) = true;
            else if (raw == "false" || raw == "0")
                *static_cast<bool*>(f.ptr) = false;
            else
                fail(key, "expects true/false, got '" + raw + "'");
            break;
        }
        case Field::String:
            *static_cast<std::string*>(f.ptr) = raw;
            break;
    }
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto fields = registry(cfg);
    for (const auto& f : fields) {
        if (f.name == key) {
            assign(f, key, value);
            return;
        }
    }
    fail(key, "is not a recognized option");
}

std::string trim_ws(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    size_t e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

} // namespace

void RunConfig::validate() const {
    RunConfig copy = *this;
    auto fields = registry(copy);
    // Re-assigning every field through the table re-checks all ranges.
    for (const auto& f : fields) {
        std::ostringstream os;
        switch (f.kind) {
            case Field::Double: os << *static_cast<double*>(f.ptr); break;
            case Field::Int: os << *static_cast<int64_t*>(f.ptr); break;
            case Field::Bool: os << (*static_cast<bool*>(f.ptr) ? "true" : "false"); break;
            case Field::String: os << *static_cast<std::string*>(f.ptr); break;
        }
        assign(f, f.name, os.str());
    }
    gradient_source_from_string(densify_source); // throws on bad names
    if (train_depth_end > train_depth_start)
        throw ContractError("config: train.depth_end must not exceed train.depth_start");
}

TrainConfig RunConfig::pretrain_config(int) const {
    TrainConfig t;
    t.iters = train_pretrain_iters;
    t.weights.lambda_ssim = train_lambda_ssim;
    t.weights.depth_start = train_depth_start;
    t.weights.depth_end = train_depth_end;
    t.weights.depth_enabled = train_depth_enabled;
    t.weights.lambda_normal = train_lambda_normal;
    t.weights.normal_activation_iter = train_normal_start;
    t.weights.total_iters = std::max<int64_t>(train_pretrain_iters, 1);
    t.lr.center = train_lr_center;
    t.lr.rotation = train_lr_rotation;
    t.lr.log_scales = train_lr_scales;
    t.lr.opacity = train_lr_opacity;
    t.lr.sh = train_lr_sh;
    t.lr_center_final_mult = train_lr_center_final_mult;
    t.densify.grad_threshold = densify_threshold;
    t.densify.omega = densify_omega;
    t.densify.elongation_min = densify_elongation_min;
    t.densify.densify_start = densify_start;
    t.densify.densify_interval = densify_interval;
    t.densify.densify_end = int64_t(densify_end_frac * double(train_pretrain_iters));
    t.densify.opacity_reset_interval = densify_opacity_reset_interval;
    t.densify.min_opacity = densify_min_opacity;
    t.densify.source = gradient_source_from_string(densify_source);
    t.densify.hard_cap = densify_hard_cap;
    t.trim_ratio = trim_pretrain_ratio;
    t.trim_every_frac = trim_every_frac;
    t.trim_at_start = false;
    t.tune_lr_center_mult = blocks_lr_center_mult;
    t.tune_lr_scales_mult = blocks_lr_scales_mult;
    return t;
}

TrainConfig RunConfig::tune_config() const {
    TrainConfig t = pretrain_config();
    t.iters = blocks_tune_iters;
    t.weights.normal_activation_iter = 0;
    t.weights.total_iters = std::max<int64_t>(blocks_tune_iters, 1);
    t.densify.densify_end = int64_t(densify_end_frac * double(blocks_tune_iters));
    t.trim_ratio = trim_tune_ratio;
    t.trim_at_start = true;
    return t;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    std::string text = ss.str();

    RunConfig cfg;
    std::string body = trim_ws(text);
    if (!body.empty() && body[0] == '{') {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(body);
        } catch (const std::exception& e) {
            throw DataError("config: invalid json in " + path + ": " + e.what());
        }
        std::function<void(const std::string&, const nlohmann::json&)> walk =
            [&](const std::string& prefix, const nlohmann::json& node) {
                for (auto it = node.begin(); it != node.end(); ++it) {
                    std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
                    if (it->is_object()) {
                        walk(key, *it);
                    } else if (it->is_boolean()) {
                        set_key(cfg, key, *it ? "true" : "false");
                    } else if (it->is_string()) {
                        set_key(cfg, key, it->get<std::string>());
                    } else {
                        std::ostringstream os;
                        os << std::setprecision(17) << it->get<double>();
                        set_key(cfg, key, os.str());
                    }
                }
            };
        walk("", doc);
    } else {
        std::istringstream lines(text);
        std::string line;
        int lineno = 0;
        while (std::getline(lines, line)) {
            ++lineno;
            std::string s = trim_ws(line);
            if (s.empty() || s[0] == '#') continue;
            size_t eq = s.find('=');
            if (eq == std::string::npos)
                throw DataError("config: " + path + ":" + std::to_string(lineno) +
                                ": expected key = value");
            std::string key = trim_ws(s.substr(0, eq));
            std::string value = trim_ws(s.substr(eq + 1));
            set_key(cfg, key, value);
        }
    }
    cfg.validate();
    return cfg;
}

void apply_override(RunConfig& cfg, const std::string& kv) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos)
        throw ContractError("config override must be key=value: " + kv);
    set_key(cfg, trim_ws(kv.substr(0, eq)), trim_ws(kv.substr(eq + 1)));
}

std::string dump_run_config(const RunConfig& cfg) {
    RunConfig copy = cfg;
    auto fields = registry(copy);
    std::ostringstream os;
    os << std::setprecision(17);
    for (const auto& f : fields) {
        os << f.name << " = ";
        switch (f.kind) {
            case Field::Double: os << *static_cast<double*>(f.ptr); break;
            case Field::Int: os << *static_cast<int64_t*>(f.ptr); break;
            case Field::Bool: os << (*static_cast<bool*>(f.ptr) ? "true" : "false"); break;
            case Field::String: os << *static_cast<std::string*>(f.ptr); break;
        }
        os << "\n";
    }
    return os.str();
}

} // namespace scv2
