import pytest

from taxonet.errors import ManifestError
from taxonet.manifest import CorpusManifest, Sample
from taxonet.splitting import stratified_split


def build_manifest(spec):
    """spec: {class: [(path, artifact_id), ...]}"""
    samples = []
    for cls, entries in spec.items():
        for path, artifact in entries:
            samples.append(Sample(path=path, leaf_class=cls, artifact_id=artifact))
    return CorpusManifest(samples=samples)


def n_per_class(cls, n, prefix="a"):
    return {cls: [(f"{cls}/{i}.ppm", f"{prefix}{cls}{i}") for i in range(n)]}


class TestBasics:
    def test_empty_manifest_rejected(self):
        with pytest.raises(ManifestError, match="empty"):
            stratified_split(CorpusManifest(), 0.2, seed=0)

    def test_ratio_bounds(self):
        m = build_manifest(n_per_class("c", 4))
        with pytest.raises(ManifestError, match="ratio"):
            stratified_split(m, 1.5, seed=0)

    def test_ten_images_ratio_point_two(self):
        m = build_manifest(n_per_class("c", 10))
        r = stratified_split(m, 0.2, seed=0, group_by_artifact=False)
        assert len(r.train) == 8
        assert len(r.test) == 2
        assert r.non_computable == []

    def test_two_images_always_one_each(self):
        m = build_manifest(n_per_class("c", 2))
        for ratio in (0.05, 0.2, 0.9):
            r = stratified_split(m, ratio, seed=0, group_by_artifact=False)
            assert len(r.train) == 1 and len(r.test) == 1

    def test_singleton_class_non_computable(self):
        m = build_manifest({**n_per_class("big", 6), **n_per_class("solo", 1)})
        r = stratified_split(m, 0.2, seed=0)
        assert ("solo", "single_image") in r.non_computable
        solo = [s for s in r.train if s.leaf_class == "solo"]
        assert len(solo) == 1
        assert not any(s.leaf_class == "solo" for s in r.test)

    def test_determinism(self):
        m = build_manifest({**n_per_class("a", 9), **n_per_class("b", 7)})
        r1 = stratified_split(m, 0.25, seed=7)
        r2 = stratified_split(m, 0.25, seed=7)
        assert r1.train.samples == r2.train.samples
        assert r1.test.samples == r2.test.samples

    def test_different_seed_changes_split(self):
        m = build_manifest(n_per_class("a", 40))
        r1 = stratified_split(m, 0.25, seed=1, group_by_artifact=False)
        r2 = stratified_split(m, 0.25, seed=2, group_by_artifact=False)
        assert [s.path for s in r1.test] != [s.path for s in r2.test]


class TestPartitionInvariants:
    def test_partition_and_histogram(self):
        m = build_manifest({**n_per_class("a", 11), **n_per_class("b", 5),
                            **n_per_class("solo", 1)})
        r = stratified_split(m, 0.3, seed=3)
        train_paths = {s.path for s in r.train}
        test_paths = {s.path for s in r.test}
        assert not train_paths & test_paths
        assert train_paths | test_paths == {s.path for s in m}
        hist = m.class_histogram()
        for cls in ("a", "b"):
            got = (sum(1 for s in r.train if s.leaf_class == cls)
                   + sum(1 for s in r.test if s.leaf_class == cls))
            assert got == hist[cls]


class TestArtifactGrouping:
    def test_no_artifact_on_both_sides(self):
        spec = {"a": [(f"a/{i}.ppm", f"art{i % 4}") for i in range(12)],
                "b": [(f"b/{i}.ppm", f"bart{i % 3}") for i in range(9)]}
        r = stratified_split(build_manifest(spec), 0.3, seed=5,
                             group_by_artifact=True)
        train_art = {s.artifact_id for s in r.train}
        test_art = {s.artifact_id for s in r.test}
        assert not train_art & test_art

    def test_single_artifact_class_non_computable(self):
        spec = {"a": [(f"a/{i}.ppm", "one_object") for i in range(5)],
                "b": [(f"b/{i}.ppm", f"b{i}") for i in range(6)]}
        r = stratified_split(build_manifest(spec), 0.3, seed=5,
                             group_by_artifact=True)
        assert ("a", "single_artifact") in r.non_computable
        assert all(s.leaf_class != "a" for s in r.test)

    def test_grouping_off_can_split_views(self):
        spec = {"a": [(f"a/{i}.ppm", "shared") for i in range(10)]}
        r = stratified_split(build_manifest(spec), 0.3, seed=5,
                             group_by_artifact=False)
        assert len(r.test) == 3
        assert r.non_computable == []

    def test_descriptor_records_mode(self):
        m = build_manifest(n_per_class("a", 4))
        r = stratified_split(m, 0.25, seed=9, group_by_artifact=True)
        assert r.descriptor.to_dict() == {
            "test_ratio": 0.25, "seed": 9, "group_by_artifact": True}
