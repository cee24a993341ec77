use std::ops::Range;

use super::{AllenRelation, Catalog, Dependency, Mission, MissionError, Objective, UavRelation};

/// One unit of work a vehicle (or several) performs for an objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    /// `<objective>/<task>`; unique within a mission.
    pub id: String,
    pub objective: String,
    /// Position of the task inside its objective.
    pub index: usize,
    pub name: String,
    /// Any one of these sensors can perform the task.
    pub sensors: Vec<String>,
    pub multi_vehicle: bool,
    pub mandatory: bool,
}

/// Expands an objective into its tasks and the dependencies its type imposes
/// between them. Dependencies name tasks by id.
pub fn expand_objective(o: &Objective, catalog: &Catalog) -> Result<(Vec<Task>, Vec<Dependency>), MissionError> {
    let ot = catalog.objective_type(&o.otype).ok_or_else(|| MissionError::UnknownObjectiveType(o.otype.clone()))?;
    let tasks: Vec<Task> = ot
        .tasks
        .iter()
        .enumerate()
        .map(|(index, t)| Task {
            id: format!("{}/{}", o.name, t.name),
            objective: o.name.clone(),
            index,
            name: t.name.clone(),
            sensors: t.sensors.clone(),
            multi_vehicle: t.multi_vehicle,
            mandatory: o.mandatory,
        })
        .collect();
    let deps = ot
        .dependencies
        .iter()
        .map(|d| Dependency {
            first: tasks[d.first].id.clone(),
            relation: d.relation,
            second: tasks[d.second].id.clone(),
            uav_relation: d.uav_relation,
            offset_s: d.offset_s,
        })
        .collect();
    Ok((tasks, deps))
}

/// A dependency resolved to task indices. Each side's interval spans the
/// performed tasks of its group.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyGroup {
    pub label: String,
    pub first: Vec<usize>,
    pub relation: AllenRelation,
    pub second: Vec<usize>,
    pub uav_relation: UavRelation,
    pub offset_s: f64,
}

/// All tasks of a mission with their dependencies.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    pub tasks: Vec<Task>,
    /// Index into `Mission::objectives` for each task.
    pub objective_of: Vec<usize>,
    /// Task index range for each objective.
    pub by_objective: Vec<Range<usize>>,
    /// Mission-level dependencies first, then those implied by objective
    /// types.
    pub dependencies: Vec<DependencyGroup>,
}

impl TaskSet {
    pub fn build(m: &Mission, catalog: &Catalog) -> Result<Self, MissionError> {
        let mut tasks = Vec::new();
        let mut objective_of = Vec::new();
        let mut by_objective = Vec::new();
        let mut intra = Vec::new();
        for (oi, o) in m.objectives.iter().enumerate() {
            let (mut ts, deps) = expand_objective(o, catalog)?;
            let base = tasks.len();
            for t in &mut ts {
                t.mandatory = m.is_mandatory(o);
            }
            by_objective.push(base..base + ts.len());
            objective_of.extend(std::iter::repeat_n(oi, ts.len()));
            for d in deps {
                let find = |id: &str| base + ts.iter().position(|t| t.id == id).expect("own task");
                intra.push(DependencyGroup {
                    label: format!("{} {} {}", d.first, d.relation.as_str(), d.second),
                    first: vec![find(&d.first)],
                    relation: d.relation,
                    second: vec![find(&d.second)],
                    uav_relation: d.uav_relation,
                    offset_s: d.offset_s,
                });
            }
            tasks.extend(ts);
        }
        let mut dependencies = Vec::new();
        for d in &m.dependencies {
            let range = |name: &str| {
                m.objective_index(name).map(|i| by_objective[i].clone().collect::<Vec<_>>()).ok_or_else(|| {
                    MissionError::Validation(vec![super::ValidationError::new(
                        "dependencies",
                        format!("no objective named {name:?}"),
                    )])
                })
            };
            dependencies.push(DependencyGroup {
                label: format!("{} {} {}", d.first, d.relation.as_str(), d.second),
                first: range(&d.first)?,
                relation: d.relation,
                second: range(&d.second)?,
                uav_relation: d.uav_relation,
                offset_s: d.offset_s,
            });
        }
        dependencies.extend(intra);
        Ok(Self { tasks, objective_of, by_objective, dependencies })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == id)
    }
}
