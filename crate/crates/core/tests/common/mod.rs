#![allow(dead_code)]

use std::sync::Arc;
use trafficlab_core::dynamics::{VehicleParams, VehicleState};
use trafficlab_core::engine::World;
use trafficlab_core::geom::Vec2;
use trafficlab_core::network::{
    orient_waypoints, Obstacle, ObstacleKind, ObstacleShape, PathContainer, RoadNetwork, FORMAT_VERSION,
};

/// A straight road along +z from the origin with a wall across it at `wall_z`.
pub fn wall_network(wall_z: f64) -> Arc<RoadNetwork> {
    let road = orient_waypoints(PathContainer::new(0, &[Vec2::new(0.0, 0.0), Vec2::new(0.0, 200.0)])).unwrap();
    Arc::new(RoadNetwork {
        format_version: FORMAT_VERSION,
        meta: None,
        world_center: Vec2::new(0.0, 100.0),
        half_extent: 150.0,
        containers: vec![road],
        signals: vec![],
        obstacles: vec![Obstacle {
            id: 0,
            kind: ObstacleKind::Boundary,
            shape: ObstacleShape::Rect {
                min: Vec2::new(-10.0, wall_z),
                max: Vec2::new(10.0, wall_z + 2.0),
            },
        }],
    })
}

/// One vehicle heading +z on the wall road with its centre at `z`.
pub fn wall_world(wall_z: f64, z: f64, speed: f64) -> World {
    let net = wall_network(wall_z);
    let mut v = VehicleState::new(0, Vec2::new(0.0, z), 0.0, 0, 1, VehicleParams::default());
    v.speed = speed;
    World::new(net, vec![v], &[], 7)
}
