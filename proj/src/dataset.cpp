#include "scv2/pipeline.hpp"
#include "scv2/io_pfm.hpp"
#include "scv2/io_png.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace scv2 {

namespace {

DepthPrior load_prior(const std::filesystem::path& pfm_path, int view_id) {
    DepthPrior prior;
    prior.view_id = view_id;
    prior.inv_depth = load_pfm(pfm_path.string());
    prior.mask.resize(prior.inv_depth.rows(), prior.inv_depth.cols());
    for (Eigen::Index y = 0; y < prior.inv_depth.rows(); ++y)
        for (Eigen::Index x = 0; x < prior.inv_depth.cols(); ++x) {
            double v = prior.inv_depth(y, x);
            prior.mask(y, x) = (std::isfinite(v) && v > 0.0) ? 1 : 0;
        }

    auto sidecar = pfm_path;
    sidecar.replace_extension(".txt");
    if (std::filesystem::exists(sidecar)) {
        std::ifstream is(sidecar);
        std::string key;
        double value;
        while (is >> key) {
            if (key == "scale" && (is >> value)) prior.scale = value;
            else if (key == "shift" && (is >> value)) prior.shift = value;
            else is >> key; // skip the value of other fields
        }
    }
    return prior;
}

} // namespace

Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    fs::path root(dir);
    fs::path cam_path = root / "cameras.json";
    if (!fs::exists(cam_path)) throw DataError("dataset: missing " + cam_path.string());

    std::ifstream is(cam_path);
    nlohmann::json doc;
    try {
        is >> doc;
    } catch (const std::exception& e) {
        throw DataError("dataset: cannot parse cameras.json: " + std::string(e.what()));
    }

    Dataset data;
    if (doc.contains("background")) {
        auto bg = doc["background"];
        data.background = Vector3d(bg.at(0), bg.at(1), bg.at(2));
    }
    if (!doc.contains("views")) throw DataError("dataset: cameras.json lacks views");

    for (const auto& v : doc["views"]) {
        ViewData view;
        Camera& cam = view.cam;
        cam.id = v.at("id");
        cam.width = v.at("width");
        cam.height = v.at("height");
        cam.fx = v.at("fx");
        cam.fy = v.at("fy");
        cam.cx = v.at("cx");
        cam.cy = v.at("cy");
        auto R = v.at("R");
        auto t = v.at("t");
        if (R.size() != 9 || t.size() != 3)
            throw DataError("dataset: camera transform must be R[9], t[3]");
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) cam.R(r, c) = R.at(size_t(3 * r + c));
        for (int r = 0; r < 3; ++r) cam.t[r] = t.at(size_t(r));
        cam.is_test = v.value("split", "train") == std::string("test");
        cam.validate();

        std::string img_rel = v.at("image");
        view.image = load_png((root / img_rel).string());
        if (view.image.height() != cam.height || view.image.width() != cam.width)
            throw DataError("dataset: image size mismatch for view " +
                            std::to_string(cam.id));

        if (v.contains("depth_prior")) {
            fs::path prior_path = root / std::string(v.at("depth_prior"));
            if (fs::exists(prior_path)) view.prior = load_prior(prior_path, cam.id);
        }

        (cam.is_test ? data.test_views : data.train_views).push_back(std::move(view));
    }
    if (data.train_views.empty()) throw DataError("dataset: no training views");

    fs::path pts = root / "points3d.ply";
    if (fs::exists(pts)) data.initial_points = load_ply(pts.string());
    fs::path gt = root / "gt_points.ply";
    if (fs::exists(gt)) data.gt_points = load_ply(gt.string());
    fs::path mesh = root / "gt_mesh.ply";
    if (fs::exists(mesh)) data.gt_mesh_path = mesh.string();
    return data;
}

} // namespace scv2
