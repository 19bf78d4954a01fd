#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "l2rdas/gtaug.hpp"
#include "l2rdas/io.hpp"
#include "l2rdas/rng.hpp"

using namespace l2rdas;

namespace {

Box3D make_box(Vec3 center, Vec3 dims, double yaw, const std::string& cls = "Sedan") {
    Box3D b;
    b.center = center;
    b.dims = dims;
    b.yaw = yaw;
    b.cls = cls;
    return b;
}

FrameSample frame_with_box_points(const Box3D& box, int n_inside, int n_outside,
                                  std::uint64_t seed) {
    FrameSample f;
    f.frame_id = "frame";
    f.boxes = {box};
    Rng rng(seed);
    for (int i = 0; i < n_inside; ++i) {
        const Vec3 local{rng.uniform(-0.45, 0.45) * box.dims.x,
                         rng.uniform(-0.45, 0.45) * box.dims.y,
                         rng.uniform(-0.45, 0.45) * box.dims.z};
        f.cloud.points.push_back({box.to_world(local), rng.uniform(0, 1), {}});
    }
    for (int i = 0; i < n_outside; ++i)
        f.cloud.points.push_back(
            {{box.center.x + 30 + i, box.center.y, box.center.z}, 0.5, {}});
    return f;
}

}  // namespace

TEST_CASE("build_bank keeps well-populated clusters") {
    const auto box = make_box({6, 1, -1}, {4, 2, 1.6}, 0.8);
    SECTION("box with 10 points yields one normalized entry") {
        auto bank = build_bank({frame_with_box_points(box, 10, 5, 1)});
        REQUIRE(bank.size() == 1);
        CHECK(bank[0].points.size() == 10);
        CHECK(bank[0].box.center.x == 0.0);
        CHECK(bank[0].box.yaw == 0.0);
        CHECK(bank[0].source_frame_id == "frame");
        for (const auto& p : bank[0].points.points) {
            CHECK(std::abs(p.pos.x) <= box.dims.x / 2 + 1e-6);
            CHECK(std::abs(p.pos.y) <= box.dims.y / 2 + 1e-6);
            CHECK(std::abs(p.pos.z) <= box.dims.z / 2 + 1e-6);
        }
    }
    SECTION("3 points with min 5 yields no entry") {
        auto bank = build_bank({frame_with_box_points(box, 3, 5, 2)});
        CHECK(bank.empty());
    }
    SECTION("membership matches a point-in-oriented-box oracle") {
        FrameSample f;
        f.frame_id = "r";
        f.boxes = {box};
        Rng rng(3);
        int oracle_inside = 0;
        for (int i = 0; i < 400; ++i) {
            Vec3 pos{rng.uniform(0, 12), rng.uniform(-4, 6), rng.uniform(-3, 1)};
            f.cloud.points.push_back({pos, 0.1, {}});
            // oracle: rotate into the frame by explicit trig
            const double c = std::cos(-box.yaw), s = std::sin(-box.yaw);
            const double dx = pos.x - box.center.x, dy = pos.y - box.center.y;
            const double lx = c * dx - s * dy, ly = s * dx + c * dy;
            const double lz = pos.z - box.center.z;
            if (std::abs(lx) <= box.dims.x / 2 && std::abs(ly) <= box.dims.y / 2 &&
                std::abs(lz) <= box.dims.z / 2)
                ++oracle_inside;
        }
        auto bank = build_bank({f}, 1);
        REQUIRE(bank.size() == 1);
        CHECK(static_cast<int>(bank[0].points.size()) == oracle_inside);
    }
}

TEST_CASE("insert_objects") {
    InsertConfig cfg;
    cfg.roi = RoiBounds{0, 40, -20, 20, -2, 6};
    cfg.ground_z = -1.7;

    const auto box = make_box({6, 1, -0.9}, {4, 2, 1.6}, 0.3);
    auto bank = build_bank({frame_with_box_points(box, 20, 0, 4)});
    REQUIRE(bank.size() == 1);

    PointCloud scene;
    Rng rng(5);
    for (int i = 0; i < 100; ++i)
        scene.points.push_back(
            {{rng.uniform(0, 40), rng.uniform(-20, 20), -1.7}, rng.uniform(0, 1), {}});

    SECTION("n_insert 0 is the identity") {
        cfg.n_insert = 0;
        auto res = insert_objects(scene, {box}, bank, cfg, 1);
        CHECK(res.inserted == 0);
        CHECK(res.cloud.size() == scene.size());
        CHECK(res.boxes.size() == 1);
    }
    SECTION("empty scene accepts one insertion with the entry's point count") {
        cfg.n_insert = 1;
        PointCloud empty;
        auto res = insert_objects(empty, {}, bank, cfg, 2);
        REQUIRE(res.inserted == 1);
        CHECK(res.cloud.size() == bank[0].points.size());
        REQUIRE(res.boxes.size() == 1);
        CHECK(res.boxes[0].center.z == Catch::Approx(cfg.ground_z + box.dims.z / 2));
    }
    SECTION("a fully occupied scene rejects all attempts") {
        // tile the ROI with boxes so any placement overlaps
        std::vector<Box3D> wall;
        for (double x = 3; x < 40; x += 5)
            for (double y = -18; y < 20; y += 5)
                wall.push_back(make_box({x, y, -0.9}, {5.5, 5.5, 1.6}, 0.0));
        cfg.n_insert = 3;
        auto res = insert_objects(scene, wall, bank, cfg, 3);
        CHECK(res.inserted == 0);
        CHECK(res.cloud.size() == scene.size());
        CHECK(res.boxes.size() == wall.size());
    }
    SECTION("no pair of output boxes overlaps in BEV") {
        cfg.n_insert = 6;
        auto res = insert_objects(scene, {box}, bank, cfg, 6);
        for (std::size_t i = 0; i < res.boxes.size(); ++i)
            for (std::size_t j = i + 1; j < res.boxes.size(); ++j)
                CHECK(bev_iou(res.boxes[i], res.boxes[j]) == 0.0);
    }
    SECTION("inserted points map back to the bank entry under the inverse pose") {
        cfg.n_insert = 1;
        PointCloud empty;
        auto res = insert_objects(empty, {}, bank, cfg, 7);
        REQUIRE(res.inserted == 1);
        const Box3D& placed = res.boxes[0];
        REQUIRE(res.cloud.size() == bank[0].points.size());
        for (std::size_t i = 0; i < res.cloud.size(); ++i) {
            const Vec3 back = placed.to_local(res.cloud.points[i].pos);
            const Vec3& orig = bank[0].points.points[i].pos;
            CHECK(std::abs(back.x - orig.x) < 1e-9);
            CHECK(std::abs(back.y - orig.y) < 1e-9);
            CHECK(std::abs(back.z - orig.z) < 1e-9);
        }
    }
    SECTION("same seed gives bitwise identical output") {
        cfg.n_insert = 4;
        auto r1 = insert_objects(scene, {box}, bank, cfg, 99);
        auto r2 = insert_objects(scene, {box}, bank, cfg, 99);
        REQUIRE(r1.cloud.size() == r2.cloud.size());
        for (std::size_t i = 0; i < r1.cloud.size(); ++i) {
            CHECK(r1.cloud.points[i].pos.x == r2.cloud.points[i].pos.x);
            CHECK(r1.cloud.points[i].pos.y == r2.cloud.points[i].pos.y);
            CHECK(r1.cloud.points[i].pos.z == r2.cloud.points[i].pos.z);
        }
        REQUIRE(r1.boxes.size() == r2.boxes.size());
        for (std::size_t i = 0; i < r1.boxes.size(); ++i) {
            CHECK(r1.boxes[i].center.x == r2.boxes[i].center.x);
            CHECK(r1.boxes[i].yaw == r2.boxes[i].yaw);
        }
    }
}
