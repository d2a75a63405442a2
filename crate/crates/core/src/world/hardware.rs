//! Hardware registry with singleton handles and exclusive execution leases.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::WorldError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardwareKind {
    Arm,
    Hand,
    Camera,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelDescriptor {
    pub name: String,
    pub dimensionality: usize,
}

impl ChannelDescriptor {
    fn new(name: &str, dimensionality: usize) -> Self {
        ChannelDescriptor {
            name: name.to_string(),
            dimensionality,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardwareSpec {
    pub name: String,
    pub kind: HardwareKind,
    pub sensor_channels: Vec<ChannelDescriptor>,
}

impl HardwareSpec {
    fn standard(name: &str, kind: HardwareKind) -> Self {
        let sensor_channels = match kind {
            HardwareKind::Arm => vec![ChannelDescriptor::new("pose", 3), ChannelDescriptor::new("force", 1)],
            HardwareKind::Hand => vec![
                ChannelDescriptor::new("aperture", 1),
                ChannelDescriptor::new("tactile", 1),
            ],
            HardwareKind::Camera => vec![ChannelDescriptor::new("object_pose", 2)],
        };
        HardwareSpec {
            name: name.to_string(),
            kind,
            sensor_channels,
        }
    }
}

/// Live controller for one named piece of hardware. At most one exists per name.
#[derive(Debug, Serialize)]
pub struct HardwareHandle {
    pub id: u64,
    pub name: String,
    pub kind: HardwareKind,
    pub sensor_channels: Vec<ChannelDescriptor>,
    #[serde(skip)]
    busy: AtomicBool,
}

impl HardwareHandle {
    /// Flattened sensor row names, e.g. `left_arm.pose[2]`.
    pub fn row_names(&self) -> Vec<String> {
        let mut rows = Vec::new();
        for ch in &self.sensor_channels {
            if ch.dimensionality == 1 {
                rows.push(format!("{}.{}", self.name, ch.name));
            } else {
                for i in 0..ch.dimensionality {
                    rows.push(format!("{}.{}[{i}]", self.name, ch.name));
                }
            }
        }
        rows
    }

    pub fn row_count(&self) -> usize {
        self.sensor_channels.iter().map(|c| c.dimensionality).sum()
    }

    pub fn is_busy(&self) -> bool {
        self.busy.load(Ordering::Acquire)
    }
}

/// Exclusive use of a set of handles for the duration of one execution.
#[derive(Debug)]
pub struct HardwareLease {
    handles: Vec<Arc<HardwareHandle>>,
}

impl HardwareLease {
    pub fn handles(&self) -> &[Arc<HardwareHandle>] {
        &self.handles
    }
}

impl Drop for HardwareLease {
    fn drop(&mut self) {
        for h in &self.handles {
            h.busy.store(false, Ordering::Release);
        }
    }
}

#[derive(Debug)]
pub struct HardwareRegistry {
    specs: Vec<HardwareSpec>,
    live: Mutex<BTreeMap<String, Arc<HardwareHandle>>>,
    next_id: AtomicU64,
}

impl Default for HardwareRegistry {
    fn default() -> Self {
        Self::new(vec![
            HardwareSpec::standard("left_arm", HardwareKind::Arm),
            HardwareSpec::standard("left_hand", HardwareKind::Hand),
            HardwareSpec::standard("right_arm", HardwareKind::Arm),
            HardwareSpec::standard("right_hand", HardwareKind::Hand),
            HardwareSpec::standard("camera", HardwareKind::Camera),
        ])
    }
}

impl HardwareRegistry {
    pub fn new(specs: Vec<HardwareSpec>) -> Self {
        HardwareRegistry {
            specs,
            live: Mutex::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn specs(&self) -> &[HardwareSpec] {
        &self.specs
    }

    pub fn contains(&self, name: &str) -> bool {
        self.specs.iter().any(|s| s.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.specs.iter().map(|s| s.name.as_str())
    }

    /// Returns the singleton handle for `name`, creating it on first use.
    pub fn acquire(&self, name: &str) -> Result<Arc<HardwareHandle>, WorldError> {
        let spec = self
            .specs
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| WorldError::UnknownHardware(name.to_string()))?;
        let mut live = self.live.lock().expect("hardware registry poisoned");
        let handle = live.entry(name.to_string()).or_insert_with(|| {
            Arc::new(HardwareHandle {
                id: self.next_id.fetch_add(1, Ordering::Relaxed),
                name: spec.name.clone(),
                kind: spec.kind,
                sensor_channels: spec.sensor_channels.clone(),
                busy: AtomicBool::new(false),
            })
        });
        Ok(Arc::clone(handle))
    }

    /// Handles for `names` in registry order.
    pub fn acquire_all(&self, names: &BTreeSet<String>) -> Result<Vec<Arc<HardwareHandle>>, WorldError> {
        for n in names {
            if !self.contains(n) {
                return Err(WorldError::UnknownHardware(n.clone()));
            }
        }
        self.specs
            .iter()
            .filter(|s| names.contains(&s.name))
            .map(|s| self.acquire(&s.name))
            .collect()
    }

    /// Marks every handle in `names` busy, or none of them if any is already busy.
    pub fn lease(&self, names: &BTreeSet<String>) -> Result<HardwareLease, WorldError> {
        let handles = self.acquire_all(names)?;
        let mut taken: Vec<Arc<HardwareHandle>> = Vec::with_capacity(handles.len());
        for h in handles {
            if h
                .busy
                .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
                .is_err()
            {
                for t in &taken {
                    t.busy.store(false, Ordering::Release);
                }
                return Err(WorldError::HardwareBusy(h.name.clone()));
            }
            taken.push(h);
        }
        Ok(HardwareLease { handles: taken })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn acquire_returns_singleton() {
        let reg = HardwareRegistry::default();
        let a = reg.acquire("left_arm").unwrap();
        let b = reg.acquire("left_arm").unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(a.id, b.id);
        assert_eq!(a.kind, HardwareKind::Arm);
    }

    #[test]
    fn camera_has_object_pose_channel() {
        let reg = HardwareRegistry::default();
        let cam = reg.acquire("camera").unwrap();
        assert_eq!(cam.kind, HardwareKind::Camera);
        assert!(cam.sensor_channels.iter().any(|c| c.name == "object_pose"));
        assert_eq!(cam.row_names(), vec!["camera.object_pose[0]", "camera.object_pose[1]"]);
    }

    #[test]
    fn unknown_hardware_is_rejected() {
        let reg = HardwareRegistry::default();
        assert!(matches!(reg.acquire("no_such"), Err(WorldError::UnknownHardware(_))));
    }

    #[test]
    fn leases_are_exclusive_and_released_on_drop() {
        let reg = HardwareRegistry::default();
        let lease = reg.lease(&set(&["left_arm", "camera"])).unwrap();
        assert!(matches!(
            reg.lease(&set(&["camera"])),
            Err(WorldError::HardwareBusy(_))
        ));
        // a failed lease must not leave the free handle marked busy
        assert!(matches!(
            reg.lease(&set(&["left_hand", "camera"])),
            Err(WorldError::HardwareBusy(_))
        ));
        assert!(!reg.acquire("left_hand").unwrap().is_busy());
        drop(lease);
        assert!(reg.lease(&set(&["camera"])).is_ok());
    }
}
