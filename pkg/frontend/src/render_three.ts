/**
 * three.js view layer: renders a SceneDescription, nothing more.  All state
 * lives server-side; this module only mirrors the latest description.
 */

import * as THREE from "three";

import { SceneDescription, TipTrace } from "./scene.js";

export class StructureView {
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  readonly renderer: THREE.WebGLRenderer;
  private lineSegments: THREE.LineSegments | null = null;
  private traceLine: THREE.Line | null = null;
  private waypointMarkers = new THREE.Group();
  private obstacleGroup = new THREE.Group();

  constructor(readonly container: HTMLElement) {
    this.camera = new THREE.PerspectiveCamera(
      50, container.clientWidth / container.clientHeight, 1, 5000);
    this.camera.position.set(420, 320, 260);
    this.camera.up.set(0, 0, 1);
    this.camera.lookAt(0, 0, 200);
    this.renderer = new THREE.WebGLRenderer({ antialias: true });
    this.renderer.setSize(container.clientWidth, container.clientHeight);
    container.appendChild(this.renderer.domElement);
    this.scene.background = new THREE.Color("#10131a");
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.9));
    this.scene.add(this.waypointMarkers);
    this.scene.add(this.obstacleGroup);
    const grid = new THREE.GridHelper(600, 12, 0x2a2f3a, 0x1a1e27);
    grid.rotation.x = Math.PI / 2;
    this.scene.add(grid);
  }

  update(description: SceneDescription, trace: TipTrace): void {
    const n = description.lines.length;
    const positions = new Float32Array(n * 6);
    const colors = new Float32Array(n * 6);
    const color = new THREE.Color();
    description.lines.forEach((line, i) => {
      positions.set(line.a, i * 6);
      positions.set(line.b, i * 6 + 3);
      color.set(line.color);
      colors.set([color.r, color.g, color.b, color.r, color.g, color.b],
                 i * 6);
    });
    if (!this.lineSegments) {
      const geometry = new THREE.BufferGeometry();
      geometry.setAttribute("position",
                            new THREE.BufferAttribute(positions, 3));
      geometry.setAttribute("color", new THREE.BufferAttribute(colors, 3));
      const material = new THREE.LineBasicMaterial({ vertexColors: true });
      this.lineSegments = new THREE.LineSegments(geometry, material);
      this.scene.add(this.lineSegments);
    } else {
      const geometry = this.lineSegments.geometry;
      (geometry.getAttribute("position") as THREE.BufferAttribute)
        .copyArray(positions).needsUpdate = true;
      (geometry.getAttribute("color") as THREE.BufferAttribute)
        .copyArray(colors).needsUpdate = true;
    }

    const pts = trace.points.flat();
    if (this.traceLine) {
      this.scene.remove(this.traceLine);
      this.traceLine.geometry.dispose();
    }
    if (trace.points.length > 1) {
      const geometry = new THREE.BufferGeometry();
      geometry.setAttribute(
        "position", new THREE.BufferAttribute(new Float32Array(pts), 3));
      this.traceLine = new THREE.Line(
        geometry, new THREE.LineBasicMaterial({ color: 0x49c2ff }));
      this.scene.add(this.traceLine);
    }
    this.renderer.render(this.scene, this.camera);
  }

  setWaypoints(points: [number, number, number][]): void {
    this.waypointMarkers.clear();
    for (const p of points) {
      const marker = new THREE.Mesh(
        new THREE.SphereGeometry(4, 12, 12),
        new THREE.MeshBasicMaterial({ color: 0x37e08a, wireframe: true }));
      marker.position.set(p[0], p[1], p[2]);
      this.waypointMarkers.add(marker);
    }
  }

  addObstacle(center: [number, number, number], radius: number): void {
    const mesh = new THREE.Mesh(
      new THREE.SphereGeometry(radius, 16, 16),
      new THREE.MeshBasicMaterial({ color: 0xd4563a, wireframe: true }));
    mesh.position.set(center[0], center[1], center[2]);
    this.obstacleGroup.add(mesh);
  }

  clearObstacles(): void {
    this.obstacleGroup.clear();
  }

  /** Unproject a click onto the horizontal plane through planeZ. */
  pickPoint(clientX: number, clientY: number,
            planeZ: number): [number, number, number] | null {
    const rect = this.renderer.domElement.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((clientX - rect.left) / rect.width) * 2 - 1,
      -((clientY - rect.top) / rect.height) * 2 + 1);
    const raycaster = new THREE.Raycaster();
    raycaster.setFromCamera(ndc, this.camera);
    const plane = new THREE.Plane(new THREE.Vector3(0, 0, 1), -planeZ);
    const hit = new THREE.Vector3();
    if (raycaster.ray.intersectPlane(plane, hit)) {
      return [hit.x, hit.y, hit.z];
    }
    return null;
  }
}
